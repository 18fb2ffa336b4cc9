"""Positive-unlabeled and one-class learning with checks for unreliable unlabeled data."""

from . import bench, core_math, datasets, models, reliability, stats
from .core_math import Kernel, LossKind, risk_nn, risk_pn, risk_pu_unbiased
from .datasets import PuDataset, PuView, ScenarioSpec, fig1_spec, fig3_spec, generate
from .models import PUSVM, DensityRatioPU, ElkanNotoClassifier, NNPUClassifier, OneClassSVM, PUSVMDual
from .reliability import ReliabilityVerdict, detect_high_alpha, detect_negative_shift
from .stats import mann_whitney_u, roc_auc, wilcoxon_signed_rank

__version__ = "0.1.0"

__all__ = [
    "DensityRatioPU",
    "ElkanNotoClassifier",
    "Kernel",
    "LossKind",
    "NNPUClassifier",
    "OneClassSVM",
    "PUSVM",
    "PUSVMDual",
    "PuDataset",
    "PuView",
    "ReliabilityVerdict",
    "ScenarioSpec",
    "bench",
    "core_math",
    "datasets",
    "detect_high_alpha",
    "detect_negative_shift",
    "fig1_spec",
    "fig3_spec",
    "generate",
    "mann_whitney_u",
    "models",
    "reliability",
    "risk_nn",
    "risk_pn",
    "risk_pu_unbiased",
    "roc_auc",
    "stats",
    "wilcoxon_signed_rank",
]
