"""Least-squares density-ratio model for PU posterior and class-prior estimates.

``r(x) ~ p_p(x) / p_u(x)`` is a nonnegative combination of Gaussian basis
functions centered on unlabeled points, fit by minimizing

    1/2 E_u[r(x)^2] - E_p[r(x)] + lambda/2 |theta|^2,   theta >= 0.

The class prior is read off held-out unlabeled points as
``min 1 / r(x_v)`` (clipped to [0, 1]), and the posterior is ``alpha_hat r(x)``.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from ..core_math import Kernel
from ._base import (
    BaseEstimator,
    ScorerMixin,
    Standardizer,
    TrainConfig,
    check_fitted_input,
    check_pu_Xs,
    make_rng,
)

RATIO_FLOOR = 1e-6


def median_gamma(X, rng, max_points=500):
    """RBF width ``1 / (4 m)`` with ``m`` the median pairwise squared distance.

    Wider than the usual median heuristic; a smooth ratio keeps the
    ``min 1/r`` prior estimate from chasing sampling noise.
    """
    if len(X) > max_points:
        X = X[rng.choice(len(X), max_points, replace=False)]
    sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    med = np.median(sq[np.triu_indices(len(X), 1)])
    return 0.25 / med if med > 0 else 1.0


class DensityRatioPU(ScorerMixin, BaseEstimator):
    """PU scorer from a nonnegative least-squares density-ratio fit.

    Parameters
    ----------
    basis_size : int
        Number of basis centers drawn from the unlabeled training points.
    gamma : float or None
        Basis width; ``None`` uses the median heuristic.
    lambda_ : float
        Ridge penalty on the coefficients.
    holdout_fraction : float
        Share of the unlabeled sample kept aside for the prior estimate.
    """

    def __init__(self, basis_size=100, gamma=None, lambda_=0.1, holdout_fraction=0.2,
                 standardize=True, random_state=0):
        self.basis_size = basis_size
        self.gamma = gamma
        self.lambda_ = lambda_
        self.holdout_fraction = holdout_fraction
        self.standardize = standardize
        self.random_state = random_state

    def fit(self, X, s):
        Xp, Xu = check_pu_Xs(X, s)
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        rng = make_rng(self.random_state)
        self.scaler_ = Standardizer(np.vstack([Xp, Xu])) if self.standardize else None
        if self.scaler_ is not None:
            Xp, Xu = self.scaler_(Xp), self.scaler_(Xu)
        perm = rng.permutation(len(Xu))
        n_hold = max(1, int(round(self.holdout_fraction * len(Xu))))
        if n_hold >= len(Xu):
            raise ValueError("holdout leaves no unlabeled training points")
        Xv, Xt = Xu[perm[:n_hold]], Xu[perm[n_hold:]]
        gamma = self.gamma if self.gamma is not None else median_gamma(np.vstack([Xp, Xt]), rng)
        self.kernel_ = Kernel.rbf(gamma)
        n_basis = min(self.basis_size, len(Xt))
        self.centers_ = Xt[np.sort(rng.choice(len(Xt), n_basis, replace=False))]

        Phi_u = self.kernel_.gram(Xt, self.centers_)
        Phi_p = self.kernel_.gram(Xp, self.centers_)
        H = Phi_u.T @ Phi_u / len(Xt) + self.lambda_ * np.eye(n_basis)
        h = Phi_p.mean(axis=0)

        def objective(theta):
            Ht = H @ theta
            return 0.5 * theta @ Ht - h @ theta, Ht - h

        res = minimize(
            objective, np.full(n_basis, 1.0 / n_basis), jac=True, method="L-BFGS-B",
            bounds=[(0.0, None)] * n_basis, options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-12},
        )
        theta = np.maximum(res.x, 0.0)
        if not np.any(theta > 0):
            raise ValueError("density-ratio fit collapsed to zero")
        self.coef_ = theta
        self.n_features_in_ = Xp.shape[1]
        r_val = self._ratio(Xv)
        self.alpha_hat_ = float(np.clip(np.min(1.0 / np.maximum(r_val, RATIO_FLOOR)), 0.0, 1.0))
        if self.alpha_hat_ <= 0.0:
            raise ValueError("class-prior estimate is zero")
        return self

    def _ratio(self, Z):
        return self.kernel_.gram(Z, self.centers_) @ self.coef_

    def density_ratio(self, X):
        X = check_fitted_input(self, X, "coef_")
        if self.scaler_ is not None:
            X = self.scaler_(X)
        return self._ratio(X)

    def decision_function(self, X):
        """Posterior estimate ``alpha_hat * r(x)``."""
        return self.alpha_hat_ * self.density_ratio(X)


def train_density_ratio(data, basis_size=100, config=TrainConfig(lambda_=0.1), holdout_fraction=0.2, **kwargs):
    """Returns ``(scorer, alpha_hat)``."""
    view = data.trainer_view() if hasattr(data, "trainer_view") else data
    X, s = view.to_Xs()
    est = DensityRatioPU(
        basis_size=basis_size, lambda_=config.lambda_, holdout_fraction=holdout_fraction,
        random_state=config.seed, **kwargs,
    ).fit(X, s)
    return est, est.alpha_hat_
