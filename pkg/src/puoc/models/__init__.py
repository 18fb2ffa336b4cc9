"""Trainable scorers. Every scorer's ``decision_function`` is oriented so that
larger values mean "more likely positive"."""

from ._base import FeatureMap, MlpSpec, Standardizer, TrainConfig
from .density_ratio import DensityRatioPU, train_density_ratio
from .dual import DualSolution, PUSVMDual, dual_score, solve_pu_svm_dual
from .mlp import (
    ElkanNotoClassifier,
    NNPUClassifier,
    Network,
    RandomNetworkScorer,
    nnpu_risk_and_grad,
    random_scorer,
    train_en,
    train_nnpu_mlp,
)
from .svm import PUSVM, OneClassSVM, train_oc_svm, train_pu_svm_sgd

__all__ = [
    "DensityRatioPU",
    "DualSolution",
    "ElkanNotoClassifier",
    "FeatureMap",
    "MlpSpec",
    "NNPUClassifier",
    "Network",
    "OneClassSVM",
    "PUSVM",
    "PUSVMDual",
    "RandomNetworkScorer",
    "Standardizer",
    "TrainConfig",
    "dual_score",
    "nnpu_risk_and_grad",
    "random_scorer",
    "solve_pu_svm_dual",
    "train_density_ratio",
    "train_en",
    "train_nnpu_mlp",
    "train_oc_svm",
    "train_pu_svm_sgd",
]
