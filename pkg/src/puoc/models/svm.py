"""OC-SVM and PU-SVM trained by mini-batch SGD in primal form."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from ..core_math import LossKind, loss_grad, risk_nn, risk_pu_unbiased
from ._base import (
    BaseEstimator,
    FeatureMap,
    ScorerMixin,
    TrainConfig,
    check_fitted_input,
    check_pu_Xs,
    make_rng,
    resolve_kernel,
)


class _Stream:
    """Endless reshuffled index stream over ``n`` items."""

    def __init__(self, n, rng):
        self.n, self.rng = n, rng
        self._perm, self._pos = rng.permutation(n), 0

    def take(self, k):
        out = []
        while k > 0:
            if self._pos == self.n:
                self._perm, self._pos = self.rng.permutation(self.n), 0
            j = min(k, self.n - self._pos)
            out.append(self._perm[self._pos : self._pos + j])
            self._pos += j
            k -= j
        return np.concatenate(out)


class _Momentum:
    def __init__(self, params, momentum):
        self.momentum = momentum
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, params, grads, lr):
        for p, g, v in zip(params, grads, self.velocity):
            v *= self.momentum
            v -= lr * g
            p += v


class OneClassSVM(ScorerMixin, BaseEstimator):
    """One-class SVM separating the positive data from the origin.

    Minimizes ``1/2 |w|^2 - r + 1/(nu N) sum max(0, r - w . phi(x_i))`` over
    ``(w, r)`` by SGD. The score is ``w . phi(x) - r``.

    Parameters
    ----------
    nu : float in (0, 1)
        Upper bound on the fraction of training points scored below zero.
    kernel : {"linear", "rbf"} or Kernel
    gamma : float
        RBF width, ignored for the linear kernel.
    n_landmarks : int
        Nystroem landmarks for the RBF feature map.
    """

    def __init__(
        self, nu=0.5, kernel="linear", gamma=1.0, n_landmarks=200,
        learning_rate=5e-3, epochs=100, batch_size=64, lambda_=0.01,
        momentum=0.0, lr_decay=0.995, random_state=0,
    ):
        self.nu = nu
        self.kernel = kernel
        self.gamma = gamma
        self.n_landmarks = n_landmarks
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.lambda_ = lambda_
        self.momentum = momentum
        self.lr_decay = lr_decay
        self.random_state = random_state

    def fit(self, X, y=None):
        if not 0.0 < self.nu < 1.0:
            raise ValueError(f"nu must lie in (0, 1), got {self.nu}")
        X = check_array(X, dtype=float)
        if len(X) < 2:
            raise ValueError("need at least two training points")
        rng = make_rng(self.random_state)
        kernel = resolve_kernel(self.kernel, self.gamma)
        self.feature_map_ = FeatureMap(kernel, X, self.n_landmarks, rng)
        F = self.feature_map_(X)
        w = np.zeros(F.shape[1])
        r = np.zeros(1)
        opt = _Momentum([w, r], self.momentum)
        stream = _Stream(len(F), rng)
        steps = -(-len(F) // self.batch_size)
        lr = self.learning_rate
        scale = 1.0 / self.nu
        for _ in range(self.epochs):
            for _ in range(steps):
                idx = stream.take(min(self.batch_size, len(F)))
                Fb = F[idx]
                active = (r[0] - Fb @ w) > 0
                gw = w - scale * Fb[active].sum(axis=0) / len(idx)
                gr = np.array([-1.0 + scale * active.sum() / len(idx)])
                opt.step([w, r], [gw, gr], lr)
            lr *= self.lr_decay
        self.coef_ = w
        self.offset_ = float(r[0])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        X = check_fitted_input(self, X, "coef_")
        return self.feature_map_(X) @ self.coef_ - self.offset_


class PUSVM(ScorerMixin, BaseEstimator):
    """PU-SVM: double-hinge SVM objective under the PU risk estimator.

    Minimizes ``lambda |w|^2 + alpha E_p l(+1, f) + max(0, E_u l(-1, f) -
    alpha E_p l(-1, f))`` with ``f(x) = w . phi(x) - b`` by mini-batch SGD.
    With ``nonnegative=False`` the clamp is dropped (unbiased objective).

    Each step draws ``batch_size`` labeled and ``batch_size`` unlabeled
    points; an epoch covers the larger of the two samples once.
    """

    def __init__(
        self, alpha=0.5, kernel="linear", gamma=1.0, n_landmarks=200,
        nonnegative=True, loss="double_hinge",
        learning_rate=5e-3, epochs=100, batch_size=64, lambda_=0.01,
        momentum=0.0, lr_decay=0.995, random_state=0,
    ):
        self.alpha = alpha
        self.kernel = kernel
        self.gamma = gamma
        self.n_landmarks = n_landmarks
        self.nonnegative = nonnegative
        self.loss = loss
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.lambda_ = lambda_
        self.momentum = momentum
        self.lr_decay = lr_decay
        self.random_state = random_state

    def fit(self, X, s):
        Xp, Xu = check_pu_Xs(X, s)
        alpha = float(self.alpha)
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
        loss = LossKind(self.loss)
        rng = make_rng(self.random_state)
        kernel = resolve_kernel(self.kernel, self.gamma)
        self.feature_map_ = FeatureMap(kernel, np.vstack([Xp, Xu]), self.n_landmarks, rng)
        Fp, Fu = self.feature_map_(Xp), self.feature_map_(Xu)
        w = np.zeros(Fp.shape[1])
        b = np.zeros(1)
        opt = _Momentum([w, b], self.momentum)
        sp, su = _Stream(len(Fp), rng), _Stream(len(Fu), rng)
        kp, ku = min(self.batch_size, len(Fp)), min(self.batch_size, len(Fu))
        steps = -(-max(len(Fp), len(Fu)) // self.batch_size)
        lr = self.learning_rate
        risk = risk_nn if self.nonnegative else risk_pu_unbiased
        self.n_clamped_ = 0
        for _ in range(self.epochs):
            for _ in range(steps):
                bp, bu = Fp[sp.take(kp)], Fu[su.take(ku)]
                tp, tu = bp @ w - b[0], bu @ w - b[0]
                br = risk(loss, tp, tu, alpha)
                # d risk / d margin per point
                gp = alpha * loss_grad(loss, 1.0, tp) / kp
                if br.clamped:
                    self.n_clamped_ += 1
                    gu = np.zeros(ku)
                else:
                    gp = gp - alpha * loss_grad(loss, -1.0, tp) / kp
                    gu = loss_grad(loss, -1.0, tu) / ku
                gw = 2.0 * self.lambda_ * w + gp @ bp + gu @ bu
                gb = np.array([-(gp.sum() + gu.sum())])
                opt.step([w, b], [gw, gb], lr)
            lr *= self.lr_decay
        self.coef_ = w
        self.intercept_ = float(b[0])
        self.n_features_in_ = Xp.shape[1]
        return self

    def decision_function(self, X):
        X = check_fitted_input(self, X, "coef_")
        return self.feature_map_(X) @ self.coef_ - self.intercept_


def train_oc_svm(positives, nu, config=TrainConfig(), kernel="linear", gamma=1.0):
    return OneClassSVM(nu=nu, kernel=kernel, gamma=gamma, **config.sgd_params()).fit(positives)


def train_pu_svm_sgd(data, alpha, kernel="linear", config=TrainConfig(), gamma=1.0, nonnegative=True):
    """Fit :class:`PUSVM` on a :class:`~puoc.datasets.PuDataset` (or its trainer view)."""
    X, s = data.trainer_view().to_Xs() if hasattr(data, "trainer_view") else data.to_Xs()
    return PUSVM(
        alpha=alpha, kernel=kernel, gamma=gamma, nonnegative=nonnegative, **config.sgd_params()
    ).fit(X, s)
