from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ..core_math import Kernel, KernelKind


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings shared by the SGD trainers.

    Defaults follow the reference SVM settings (lambda 0.01, lr 5e-3,
    per-epoch decay 0.995, 100 epochs).
    """

    learning_rate: float = 5e-3
    epochs: int = 100
    batch_size: int = 64
    lambda_: float = 0.01
    momentum: float = 0.0
    seed: int = 0
    lr_decay: float = 0.995

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if int(self.epochs) < 1 or int(self.batch_size) < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.lambda_ < 0:
            raise ValueError("lambda_ must be nonnegative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must lie in (0, 1]")

    def sgd_params(self):
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lambda_": self.lambda_,
            "momentum": self.momentum,
            "lr_decay": self.lr_decay,
            "random_state": self.seed,
        }

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple = (2, 16, 1)
    activation: str = "tanh"

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2 or any(n < 1 for n in sizes):
            raise ValueError("layer_sizes must be at least two positive integers")
        if sizes[-1] != 1:
            raise ValueError("the output layer must have size 1")
        if self.activation not in ("tanh", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")

    def check_dim(self, dim):
        if self.layer_sizes[0] != dim:
            raise ValueError(f"network input size {self.layer_sizes[0]} != data dimension {dim}")


def make_rng(seed):
    return np.random.default_rng(int(seed))


def check_pu_Xs(X, s):
    """Validate PU training input; ``s`` is 1 for labeled positives, 0 for unlabeled."""
    X = check_array(X, dtype=float)
    s = np.asarray(s).ravel()
    if s.shape[0] != X.shape[0]:
        raise ValueError("X and s have different lengths")
    if not np.all((s == 0) | (s == 1)):
        raise ValueError("s must contain only 0 (unlabeled) and 1 (labeled positive)")
    if not (s == 1).any():
        raise ValueError("no labeled positive examples")
    if not (s == 0).any():
        raise ValueError("no unlabeled examples")
    return X[s == 1], X[s == 0]


def resolve_kernel(kernel, gamma):
    if isinstance(kernel, Kernel):
        return kernel
    if KernelKind(kernel) is KernelKind.LINEAR:
        return Kernel.linear()
    return Kernel.rbf(gamma)


class Standardizer:
    """Zero-mean, unit-variance scaling with statistics from the training set."""

    def __init__(self, X):
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)

    def __call__(self, X):
        return (X - self.mean_) / self.scale_


class FeatureMap:
    """Explicit finite-dimensional feature map for a kernel.

    Linear: the identity, so the weight vector lives in input space.
    RBF: a Nystroem map ``phi(x) = k(x, Z) U diag(1/sqrt(lam))`` over landmark
    points ``Z``; directions of ``K(Z, Z)`` with relative eigenvalue below
    ``rcond`` are dropped. Then ``phi(x) . phi(y)`` approximates ``K(x, y)``.
    """

    def __init__(self, kernel, X, n_landmarks=200, rng=None, rcond=1e-8):
        self.kernel = kernel
        if kernel.kind is KernelKind.LINEAR:
            self.landmarks_ = None
            self.dim_ = X.shape[1]
            return
        rng = rng if rng is not None else np.random.default_rng(0)
        idx = np.sort(rng.choice(len(X), size=min(n_landmarks, len(X)), replace=False))
        Z = X[idx]
        K = kernel.gram(Z, Z)
        lam, U = np.linalg.eigh(K)
        keep = lam > rcond * lam.max()
        self.landmarks_ = Z
        self.projection_ = U[:, keep] / np.sqrt(lam[keep])
        self.dim_ = int(keep.sum())

    def __call__(self, X):
        if self.landmarks_ is None:
            return X
        return self.kernel.gram(X, self.landmarks_) @ self.projection_


class ScorerMixin:
    """Scorers rank points: a larger ``decision_function`` means more likely positive."""

    def score_samples(self, X):
        return self.decision_function(X)

    def auc(self, X_pos, X_neg):
        from ..stats import roc_auc

        return roc_auc(self.decision_function(X_pos), self.decision_function(X_neg))


def check_fitted_input(est, X, attr):
    check_is_fitted(est, attr)
    X = check_array(X, dtype=float)
    if X.shape[1] != est.n_features_in_:
        raise ValueError(f"X has {X.shape[1]} features, expected {est.n_features_in_}")
    return X


__all__ = [
    "BaseEstimator",
    "FeatureMap",
    "MlpSpec",
    "ScorerMixin",
    "Standardizer",
    "TrainConfig",
    "check_fitted_input",
    "check_pu_Xs",
    "make_rng",
    "resolve_kernel",
]
