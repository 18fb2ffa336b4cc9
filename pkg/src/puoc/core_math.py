"""Margin losses, kernels and empirical risk estimators for PU learning.

Losses take a class code ``y`` in {+1, -1} and a real margin ``t``. Labels
in {0, 1} are mapped with :func:`class_code` at module boundaries.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class LossKind(str, enum.Enum):
    HINGE = "hinge"
    DOUBLE_HINGE = "double_hinge"
    SIGMOID = "sigmoid"
    LOGISTIC = "logistic"


def class_code(label):
    """Map a {0, 1} label (or array of labels) to a {-1, +1} class code."""
    label = np.asarray(label)
    return np.where(label == 1, 1.0, -1.0)


def _check_code(y):
    if np.isscalar(y) and (y == 1.0 or y == -1.0):
        return float(y)
    y = np.asarray(y, dtype=float)
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("class code must be +1 or -1")
    return y


def loss_eval(kind, y, t):
    """Evaluate a margin loss elementwise.

    Works on scalars and arrays; scalars in give a float back.
    """
    kind = LossKind(kind)
    y = _check_code(y)
    t = np.asarray(t, dtype=float)
    z = y * t
    if kind is LossKind.HINGE:
        out = np.maximum(0.0, 1.0 - z)
    elif kind is LossKind.DOUBLE_HINGE:
        out = np.maximum(-2.0 * z, np.maximum(0.0, 1.0 - z))
    elif kind is LossKind.SIGMOID:
        # 1 / (1 + e^z), written to avoid overflow for large |z|
        out = np.exp(-np.logaddexp(0.0, z))
    else:
        out = np.logaddexp(0.0, -z)
    return out if out.ndim else float(out)


def _piece_slope(kind, z, from_right):
    """Slope in z of the hinge-type loss; one-sided at the kinks."""
    lt = np.less if from_right else np.less_equal
    if kind is LossKind.HINGE:
        # max(0, 1 - z)
        return np.where(lt(z, 1.0), -1.0, 0.0)
    # -2z for z <= -1, 1 - z for -1 < z < 1, 0 for z >= 1
    return np.where(lt(z, -1.0), -2.0, np.where(lt(z, 1.0), -1.0, 0.0))


def loss_grad(kind, y, t):
    """Derivative of the loss with respect to the margin ``t``.

    At the kinks of the hinge and double hinge the right-hand derivative is
    returned.
    """
    kind = LossKind(kind)
    y = _check_code(y)
    t = np.asarray(t, dtype=float)
    z = y * t
    # t -> z = y t runs backwards for y = -1, so the right-hand derivative in
    # t uses the left-hand derivative in z there
    if kind in (LossKind.HINGE, LossKind.DOUBLE_HINGE):
        if np.ndim(y) == 0:
            dz = _piece_slope(kind, z, from_right=y > 0)
        else:
            dz = np.where(y > 0, _piece_slope(kind, z, True), _piece_slope(kind, z, False))
        out = y * dz
    elif kind is LossKind.SIGMOID:
        s = np.exp(-np.logaddexp(0.0, z))
        out = -y * s * (1.0 - s)
    else:
        out = -y * np.exp(-np.logaddexp(0.0, z))
    return out if out.ndim else float(out)


class KernelKind(str, enum.Enum):
    LINEAR = "linear"
    RBF = "rbf"


@dataclass(frozen=True)
class Kernel:
    kind: KernelKind = KernelKind.LINEAR
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.kind is KernelKind.RBF and not self.gamma > 0:
            raise ValueError(f"rbf gamma must be positive, got {self.gamma}")

    @classmethod
    def linear(cls):
        return cls(KernelKind.LINEAR)

    @classmethod
    def rbf(cls, gamma):
        return cls(KernelKind.RBF, float(gamma))

    def gram(self, A, B):
        """Kernel matrix between the rows of ``A`` and ``B``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[1] != B.shape[1]:
            raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
        if self.kind is KernelKind.LINEAR:
            return A @ B.T
        sq = (
            np.sum(A * A, axis=1)[:, None]
            + np.sum(B * B, axis=1)[None, :]
            - 2.0 * (A @ B.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-self.gamma * sq)

    def __call__(self, a, b):
        return kernel_eval(self, a, b)


def kernel_eval(k, a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if k.kind is KernelKind.LINEAR:
        return float(a @ b)
    # sum of squared differences is symmetric in (a, b) term by term
    return float(np.exp(-k.gamma * np.sum((a - b) ** 2)))


def check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"class prior must lie in (0, 1], got {alpha}")
    return alpha


@dataclass(frozen=True)
class RiskBreakdown:
    total: float
    pos_term: float
    neg_term_raw: float
    clamped: bool


def _scores(values, name):
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError(f"{name} must be non-empty")
    return values


def _mean(values):
    # np.sum is pairwise for contiguous float arrays
    return float(np.sum(values) / values.size)


def risk_pn(loss, scores_p, scores_n, alpha):
    """Supervised risk: weighted sum of the positive and negative risks."""
    alpha = check_alpha(alpha)
    sp = _scores(scores_p, "scores_p")
    sn = _scores(scores_n, "scores_n")
    pos = _mean(loss_eval(loss, 1.0, sp))
    neg = _mean(loss_eval(loss, -1.0, sn))
    return alpha * pos + (1.0 - alpha) * neg


def _pu_terms(loss, scores_p, scores_u, alpha):
    alpha = check_alpha(alpha)
    sp = _scores(scores_p, "scores_p")
    su = _scores(scores_u, "scores_u")
    pos_term = alpha * _mean(loss_eval(loss, 1.0, sp))
    neg_raw = _mean(loss_eval(loss, -1.0, su)) - alpha * _mean(loss_eval(loss, -1.0, sp))
    return pos_term, neg_raw


def risk_pu_unbiased(loss, scores_p, scores_u, alpha):
    """Unbiased PU risk; the negative risk is estimated as R_u^- - alpha R_p^-."""
    pos_term, neg_raw = _pu_terms(loss, scores_p, scores_u, alpha)
    return RiskBreakdown(pos_term + neg_raw, pos_term, neg_raw, False)


def risk_nn(loss, scores_p, scores_u, alpha):
    """Non-negative PU risk: the estimated negative risk is clamped at zero."""
    pos_term, neg_raw = _pu_terms(loss, scores_p, scores_u, alpha)
    return RiskBreakdown(pos_term + max(0.0, neg_raw), pos_term, neg_raw, neg_raw < 0.0)
