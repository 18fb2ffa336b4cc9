"""Dual quadratic program of the unbiased (unclamped) PU-SVM.

The primal solved here is

    min_{w, b}  |w|^2 + 1/n_u sum_u l_dh(-1, f(x_i)) + 2 alpha b
                - alpha/n_p sum_p w . phi(x_i),          f(x) = w . phi(x) - b

with the slack form of the double hinge. Its Lagrangian gives
``w = sum_i tau_i phi(x_i)`` with ``tau_i = alpha / (2 n_p)`` on labeled
positives and ``tau_i = -B_i / 2 - C_i`` on unlabeled points, so every
labeled positive is a support vector. The dual

    max_{B, C}  sum_u B_i - tau' K tau
    s.t.        B, C >= 0,  B_i + C_i <= 1/n_u,  sum B + 2 sum C = 2 alpha

is solved by accelerated projected-gradient ascent on ``(B, C)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ..core_math import check_alpha
from ._base import BaseEstimator, ScorerMixin, check_fitted_input, check_pu_Xs, resolve_kernel

DEFAULT_MAX_POINTS = 200


class DualInfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class DualSolution:
    tau: np.ndarray  # labeled positives first, then unlabeled
    B: np.ndarray
    C: np.ndarray
    b: float
    objective_value: float
    n_pos: int
    alpha: float
    iterations: int = 0
    converged: bool = True

    @property
    def A(self):
        n_u = len(self.B)
        return 1.0 / n_u - self.B - self.C

    def residuals(self):
        """Violation of each constraint family; all should be ~0."""
        n_u = len(self.B)
        tau_p, tau_u = self.tau[: self.n_pos], self.tau[self.n_pos :]
        return {
            "nonnegativity": float(max(0.0, -min(self.A.min(), self.B.min(), self.C.min()))),
            "balance": float(abs(self.B.sum() + 2.0 * self.C.sum() - 2.0 * self.alpha)),
            "box": float(max(0.0, (self.B + self.C - 1.0 / n_u).max())),
            "tau": float(max(
                np.abs(tau_p - self.alpha / (2 * self.n_pos)).max(),
                np.abs(tau_u + 0.5 * self.B + self.C).max(),
            )),
        }


def _project_triangle(x, y, cap):
    """Euclidean projection of points onto {x >= 0, y >= 0, x + y <= cap}."""
    # candidate 1: clip to the quadrant, valid if under the hypotenuse
    px, py = np.maximum(x, 0.0), np.maximum(y, 0.0)
    over = px + py > cap
    if over.any():
        # project onto the segment x + y = cap, 0 <= x <= cap
        hx = np.clip((x - y + cap) / 2.0, 0.0, cap)
        px = np.where(over, hx, px)
        py = np.where(over, cap - hx, py)
    return px, py


def _project(Bv, Cv, cap, alpha):
    """Projection onto the dual feasible set.

    The equality ``sum B + 2 sum C = 2 alpha`` is handled through its
    multiplier ``mu``: the projection is ``P_T((B, C) - mu (1, 2))`` per point
    and the weighted sum is nonincreasing in ``mu``.
    """

    def excess(mu):
        pb, pc = _project_triangle(Bv - mu, Cv - 2.0 * mu, cap)
        return pb.sum() + 2.0 * pc.sum() - 2.0 * alpha

    lo, hi = -1.0, 1.0
    while excess(lo) < 0:
        lo *= 2.0
    while excess(hi) > 0:
        hi *= 2.0
    mu = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return _project_triangle(Bv - mu, Cv - 2.0 * mu, cap)


def _primal_objective_b(f_u, alpha, bvals):
    """Primal objective in ``b`` for fixed ``w`` (terms depending on ``b`` only)."""
    t = f_u[None, :] - np.asarray(bvals)[:, None]
    xi = np.maximum(np.maximum(2.0 * t, 0.0), 1.0 + t)
    return 2.0 * alpha * np.asarray(bvals) + xi.mean(axis=1)


def _recover_offset(f_u, B, C, alpha, delta):
    cap = 1.0 / len(B)
    cands = []
    # 0 < B < 1/n_u with C = 0: margin at t = -1
    on_lower = (B > delta) & (B < cap - delta) & (C <= delta)
    cands.extend(f_u[on_lower] + 1.0)
    # B, C > 0 share the box: margin at t = 1
    on_upper = (B > delta) & (C > delta)
    cands.extend(f_u[on_upper] - 1.0)
    if cands:
        return float(np.median(cands))
    # piecewise-linear convex in b: minimum sits on a breakpoint
    bp = np.unique(np.concatenate([f_u + 1.0, f_u - 1.0]))
    vals = _primal_objective_b(f_u, alpha, bp)
    return float(bp[np.argmin(vals)])


def _lagrangian(tau, B, C, K, n_pos, alpha):
    """Dual objective written term by term as in the kernelized Lagrangian."""
    u = slice(n_pos, None)
    Ktau = K @ tau
    return float(
        tau @ Ktau
        - alpha / n_pos * tau @ K[:, :n_pos].sum(axis=1)
        + B.sum()
        + tau @ (K[:, u] @ B)
        + 2.0 * tau @ (K[:, u] @ C)
    )


def solve_pu_svm_dual(data, alpha, kernel="linear", tolerance=1e-8, gamma=1.0,
                      max_points=DEFAULT_MAX_POINTS, max_iter=100_000):
    """Solve the PU-SVM dual on a small instance and return a :class:`DualSolution`."""
    if hasattr(data, "trainer_view"):
        data = data.trainer_view()
    Xp, Xu = data.positive, data.unlabeled
    return _solve(Xp, Xu, alpha, resolve_kernel(kernel, gamma), tolerance, max_points, max_iter)


def _solve(Xp, Xu, alpha, kernel, tolerance, max_points, max_iter):
    alpha = check_alpha(alpha)
    n_p, n_u = len(Xp), len(Xu)
    if n_p < 1 or n_u < 1:
        raise ValueError("need labeled and unlabeled points")
    if n_p + n_u > max_points:
        raise ValueError(f"instance has {n_p + n_u} points, cap is {max_points}")
    cap = 1.0 / n_u
    # the largest attainable sum B + 2 sum C is 2 n_u cap = 2
    if 2.0 * alpha > 2.0 + 1e-12:
        raise DualInfeasibleError("balance constraint cannot be met")

    X = np.vstack([Xp, Xu])
    K = kernel.gram(X, X)
    tau_p = np.full(n_p, alpha / (2.0 * n_p))
    Kpu = K[n_p:, :n_p] @ tau_p
    Kuu = K[n_p:, n_p:]

    def grad(B, C):
        f = Kpu - Kuu @ (0.5 * B + C)  # w . phi(x_i) on unlabeled points
        return 1.0 + f, 2.0 * f, f

    def objective(B, C):
        tau_u = -0.5 * B - C
        tau = np.concatenate([tau_p, tau_u])
        return B.sum() - tau @ K @ tau

    L = 2.5 * max(np.linalg.eigvalsh(Kuu).max(), 1e-12)
    step = 1.0 / L
    B, C = _project(np.full(n_u, min(alpha, 1.0) * cap), np.zeros(n_u), cap, alpha)
    yB, yC, t_acc = B.copy(), C.copy(), 1.0
    obj = objective(B, C)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gB, gC, _ = grad(yB, yC)
        nB, nC = _project(yB + step * gB, yC + step * gC, cap, alpha)
        new_obj = objective(nB, nC)
        if new_obj < obj:
            # restart momentum when ascent stalls
            t_acc, yB, yC = 1.0, B.copy(), C.copy()
            gB, gC, _ = grad(yB, yC)
            nB, nC = _project(yB + step * gB, yC + step * gC, cap, alpha)
            new_obj = objective(nB, nC)
        move = max(np.abs(nB - B).max(), np.abs(nC - C).max())
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc)) / 2.0
        yB = nB + (t_acc - 1.0) / t_next * (nB - B)
        yC = nC + (t_acc - 1.0) / t_next * (nC - C)
        B, C, t_acc = nB, nC, t_next
        done = move < tolerance * cap and abs(new_obj - obj) < tolerance
        obj = new_obj
        if done:
            converged = True
            break

    tau = np.concatenate([tau_p, -0.5 * B - C])
    f_u = K[n_p:] @ tau
    b = _recover_offset(f_u, B, C, alpha, delta=1e-3 * cap)
    return DualSolution(
        tau=tau, B=B, C=C, b=b,
        objective_value=_lagrangian(tau, B, C, K, n_p, alpha),
        n_pos=n_p, alpha=alpha, iterations=it, converged=converged,
    )


def primal_objective(sol, data, kernel="linear", gamma=1.0):
    """Primal objective at ``w = sum tau_i phi(x_i)`` and the recovered ``b``."""
    kernel = resolve_kernel(kernel, gamma)
    if hasattr(data, "trainer_view"):
        data = data.trainer_view()
    X = np.vstack([data.positive, data.unlabeled])
    K = kernel.gram(X, X)
    f = K @ sol.tau
    n_p = sol.n_pos
    return float(
        sol.tau @ f
        + _primal_objective_b(f[n_p:], sol.alpha, [sol.b])[0]
        - sol.alpha / n_p * f[:n_p].sum()
    )


def training_margins(sol, data, kernel="linear", gamma=1.0):
    """``w . phi(x_i) - b`` for every training point, from the Gram matrix."""
    kernel = resolve_kernel(kernel, gamma)
    if hasattr(data, "trainer_view"):
        data = data.trainer_view()
    X = np.vstack([data.positive, data.unlabeled])
    return kernel.gram(X, X) @ sol.tau - sol.b


def dual_score(sol, data, kernel, x, gamma=1.0):
    """Kernel-expansion score ``sum_i tau_i K(x_i, x) - b`` for one point or many."""
    kernel = resolve_kernel(kernel, gamma)
    if hasattr(data, "trainer_view"):
        data = data.trainer_view()
    X = np.vstack([data.positive, data.unlabeled])
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != X.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {X.shape[1]}")
    out = kernel.gram(x, X) @ sol.tau - sol.b
    return float(out[0]) if single else out


class PUSVMDual(ScorerMixin, BaseEstimator):
    """Estimator wrapper around :func:`solve_pu_svm_dual`."""

    def __init__(self, alpha=0.5, kernel="linear", gamma=1.0, tol=1e-8,
                 max_points=DEFAULT_MAX_POINTS, max_iter=100_000):
        self.alpha = alpha
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_points = max_points
        self.max_iter = max_iter

    def fit(self, X, s):
        Xp, Xu = check_pu_Xs(X, s)
        self.kernel_ = resolve_kernel(self.kernel, self.gamma)
        self.solution_ = _solve(Xp, Xu, self.alpha, self.kernel_, self.tol, self.max_points, self.max_iter)
        self.support_vectors_ = np.vstack([Xp, Xu])
        self.dual_coef_ = self.solution_.tau
        self.intercept_ = self.solution_.b
        self.n_features_in_ = Xp.shape[1]
        return self

    def decision_function(self, X):
        X = check_fitted_input(self, X, "solution_")
        return self.kernel_.gram(X, self.support_vectors_) @ self.dual_coef_ - self.intercept_
