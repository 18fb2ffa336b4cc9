"""Small feed-forward networks with hand-written backprop.

Used by nnPU, the Elkan-Noto (EN) two-step model and the untrained random
scorer for reliability testing.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit
from sklearn.utils.validation import check_array

from ..core_math import LossKind, loss_grad, risk_nn, risk_pu_unbiased
from ._base import (
    BaseEstimator,
    MlpSpec,
    ScorerMixin,
    Standardizer,
    TrainConfig,
    check_fitted_input,
    check_pu_Xs,
    make_rng,
)


class Network:
    """Fully connected network with a scalar linear output.

    Weights are drawn uniform in +-sqrt(6 / (fan_in + fan_out)); biases start
    at zero.
    """

    def __init__(self, spec, rng):
        self.spec = spec
        self.params = []
        for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))

    def _act(self, z):
        return np.tanh(z) if self.spec.activation == "tanh" else np.maximum(z, 0.0)

    def _act_grad(self, z, a):
        return 1.0 - a * a if self.spec.activation == "tanh" else (z > 0).astype(float)

    def forward(self, X, cache=False):
        a = X
        acts, pre = [X], []
        n_layers = len(self.params) // 2
        for k in range(n_layers):
            W, b = self.params[2 * k], self.params[2 * k + 1]
            z = a @ W + b
            a = z if k == n_layers - 1 else self._act(z)
            pre.append(z)
            acts.append(a)
        out = a[:, 0]
        return (out, (acts, pre)) if cache else out

    def backward(self, cache, dout):
        """Gradients of ``sum(dout * output)`` with respect to every parameter."""
        acts, pre = cache
        n_layers = len(self.params) // 2
        grads = [None] * len(self.params)
        delta = dout[:, None]
        for k in reversed(range(n_layers)):
            grads[2 * k] = acts[k].T @ delta
            grads[2 * k + 1] = delta.sum(axis=0)
            if k:
                delta = (delta @ self.params[2 * k].T) * self._act_grad(pre[k - 1], acts[k])
        return grads


def nnpu_risk_and_grad(net, Xp, Xu, alpha, loss=LossKind.SIGMOID, nonnegative=True):
    """PU risk of the network outputs and its gradient with respect to the weights.

    With ``nonnegative`` the negative part is clamped at zero, and an active
    clamp contributes no gradient.
    """
    fp, cp = net.forward(Xp, cache=True)
    fu, cu = net.forward(Xu, cache=True)
    risk = (risk_nn if nonnegative else risk_pu_unbiased)(loss, fp, fu, alpha)
    dp = alpha * loss_grad(loss, 1.0, fp) / len(fp)
    du = np.zeros(len(fu))
    if not risk.clamped:
        dp = dp - alpha * loss_grad(loss, -1.0, fp) / len(fp)
        du = loss_grad(loss, -1.0, fu) / len(fu)
    gp = net.backward(cp, dp)
    gu = net.backward(cu, du)
    return risk, [a + b for a, b in zip(gp, gu)]


def _neg_risk_grad(net, Xp, Xu, alpha, loss):
    fp, cp = net.forward(Xp, cache=True)
    fu, cu = net.forward(Xu, cache=True)
    gp = net.backward(cp, -alpha * loss_grad(loss, -1.0, fp) / len(fp))
    gu = net.backward(cu, loss_grad(loss, -1.0, fu) / len(fu))
    return [a + b for a, b in zip(gp, gu)]


class _SGD:
    def __init__(self, params, lr, momentum):
        self.lr, self.momentum = lr, momentum
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        for p, g, v in zip(params, grads, self.velocity):
            v *= self.momentum
            v -= self.lr * g
            p += v


def _batches(n, batch_size, rng):
    perm = rng.permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]


class _NetworkScorer(ScorerMixin, BaseEstimator):
    def _inputs(self, X):
        X = check_fitted_input(self, X, "network_")
        return self.scaler_(X) if self.scaler_ is not None else X

    def decision_function(self, X):
        return self.network_.forward(self._inputs(X))


class NNPUClassifier(_NetworkScorer):
    """MLP trained on the non-negative PU risk with the sigmoid loss.

    ``defensive=True`` switches to the gradient-ascent step on the negative
    part whenever it drops below ``-beta`` (scaled by ``ascent``); the
    default is the plain subgradient of the clamp.
    """

    def __init__(
        self, alpha=0.5, hidden=(16,), activation="tanh", loss="sigmoid",
        nonnegative=True, defensive=False, beta=0.0, ascent=1.0, standardize=True,
        learning_rate=0.05, epochs=50, batch_size=128, lambda_=1e-4, momentum=0.9,
        lr_decay=0.995, random_state=0,
    ):
        self.alpha = alpha
        self.hidden = hidden
        self.activation = activation
        self.loss = loss
        self.nonnegative = nonnegative
        self.defensive = defensive
        self.beta = beta
        self.ascent = ascent
        self.standardize = standardize
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.lambda_ = lambda_
        self.momentum = momentum
        self.lr_decay = lr_decay
        self.random_state = random_state

    def fit(self, X, s):
        Xp, Xu = check_pu_Xs(X, s)
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        loss = LossKind(self.loss)
        rng = make_rng(self.random_state)
        self.scaler_ = Standardizer(np.vstack([Xp, Xu])) if self.standardize else None
        if self.scaler_ is not None:
            Xp, Xu = self.scaler_(Xp), self.scaler_(Xu)
        spec = MlpSpec((Xp.shape[1], *self.hidden, 1), self.activation)
        net = Network(spec, rng)
        opt = _SGD(net.params, self.learning_rate, self.momentum)
        n_batches = max(1, -(-max(len(Xp), len(Xu)) // self.batch_size))
        self.n_clamped_ = 0
        for _ in range(self.epochs):
            bp = np.array_split(rng.permutation(len(Xp)), n_batches)
            bu = np.array_split(rng.permutation(len(Xu)), n_batches)
            for ip, iu in zip(bp, bu):
                if len(ip) == 0 or len(iu) == 0:
                    continue
                risk, grads = nnpu_risk_and_grad(net, Xp[ip], Xu[iu], self.alpha, loss, self.nonnegative)
                if risk.clamped:
                    self.n_clamped_ += 1
                if self.defensive and self.nonnegative and risk.neg_term_raw < -self.beta:
                    grads = [-self.ascent * g for g in _neg_risk_grad(net, Xp[ip], Xu[iu], self.alpha, loss)]
                grads = [g + 2.0 * self.lambda_ * p for g, p in zip(grads, net.params)]
                opt.step(net.params, grads)
            opt.lr *= self.lr_decay
        self.network_ = net
        self.layer_sizes_ = spec.layer_sizes
        self.n_features_in_ = Xp.shape[1]
        return self


class ElkanNotoClassifier(_NetworkScorer):
    """Two-step EN model under SCAR.

    A network ``g`` separates labeled from unlabeled points with the
    logistic loss; ``c_hat`` is the mean of ``g`` on held-out labeled
    positives. ``decision_function`` returns ``g / c_hat`` (a positive
    rescaling, so rankings are those of ``g``); :meth:`predict_proba`
    clips it to [0, 1].
    """

    def __init__(
        self, hidden=(16,), activation="tanh", holdout_fraction=0.2, standardize=True,
        learning_rate=0.05, epochs=50, batch_size=128, lambda_=1e-4, momentum=0.9,
        lr_decay=0.995, random_state=0,
    ):
        self.hidden = hidden
        self.activation = activation
        self.holdout_fraction = holdout_fraction
        self.standardize = standardize
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.lambda_ = lambda_
        self.momentum = momentum
        self.lr_decay = lr_decay
        self.random_state = random_state

    def fit(self, X, s):
        Xp, Xu = check_pu_Xs(X, s)
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        rng = make_rng(self.random_state)
        n_hold = int(round(self.holdout_fraction * len(Xp)))
        if n_hold < 10 or len(Xp) - n_hold < 1:
            raise ValueError(f"holdout would have {n_hold} labeled positives, need at least 10")
        perm = rng.permutation(len(Xp))
        Xh, Xt = Xp[perm[:n_hold]], Xp[perm[n_hold:]]
        Xtr = np.vstack([Xt, Xu])
        y = np.concatenate([np.ones(len(Xt)), -np.ones(len(Xu))])
        self.scaler_ = Standardizer(Xtr) if self.standardize else None
        if self.scaler_ is not None:
            Xtr, Xh = self.scaler_(Xtr), self.scaler_(Xh)
        spec = MlpSpec((Xtr.shape[1], *self.hidden, 1), self.activation)
        net = Network(spec, rng)
        opt = _SGD(net.params, self.learning_rate, self.momentum)
        for _ in range(self.epochs):
            for idx in _batches(len(Xtr), self.batch_size, rng):
                f, cache = net.forward(Xtr[idx], cache=True)
                d = loss_grad(LossKind.LOGISTIC, y[idx], f) / len(idx)
                grads = net.backward(cache, d)
                grads = [g + 2.0 * self.lambda_ * p for g, p in zip(grads, net.params)]
                opt.step(net.params, grads)
            opt.lr *= self.lr_decay
        self.network_ = net
        self.c_hat_ = float(np.mean(expit(net.forward(Xh))))
        if self.c_hat_ <= 1e-6:
            raise ValueError(f"calibration failed: c_hat = {self.c_hat_:.3g}")
        self.n_features_in_ = Xp.shape[1]
        return self

    def labeled_probability(self, X):
        """``g(x)``: probability of being labeled."""
        return expit(self.network_.forward(self._inputs(X)))

    def decision_function(self, X):
        return self.labeled_probability(X) / self.c_hat_

    def predict_proba(self, X):
        p = np.clip(self.decision_function(X), 0.0, 1.0)
        return np.column_stack([1.0 - p, p])


class RandomNetworkScorer(_NetworkScorer):
    """Untrained network with seeded random weights; ``fit`` only records shapes."""

    def __init__(self, hidden=(16,), activation="tanh", random_state=0):
        self.hidden = hidden
        self.activation = activation
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        return self._init(X.shape[1])

    def _init(self, dim, spec=None):
        spec = spec or MlpSpec((dim, *self.hidden, 1), self.activation)
        spec.check_dim(dim)
        self.network_ = Network(spec, make_rng(self.random_state))
        self.scaler_ = None
        self.n_features_in_ = dim
        return self


def _Xs(data):
    view = data.trainer_view() if hasattr(data, "trainer_view") else data
    return view.to_Xs()


def _net_params(spec, config):
    return dict(
        hidden=tuple(spec.layer_sizes[1:-1]), activation=spec.activation,
        learning_rate=config.learning_rate, epochs=config.epochs, batch_size=config.batch_size,
        lambda_=config.lambda_, momentum=config.momentum, lr_decay=config.lr_decay,
        random_state=config.seed,
    )


def train_nnpu_mlp(data, alpha, spec, config, **kwargs):
    X, s = _Xs(data)
    spec.check_dim(X.shape[1])
    return NNPUClassifier(alpha=alpha, **_net_params(spec, config), **kwargs).fit(X, s)


def train_en(data, spec, config, holdout_fraction=0.2, **kwargs):
    """Returns ``(scorer, c_hat)``."""
    X, s = _Xs(data)
    spec.check_dim(X.shape[1])
    est = ElkanNotoClassifier(holdout_fraction=holdout_fraction, **_net_params(spec, config), **kwargs).fit(X, s)
    return est, est.c_hat_


def random_scorer(dim, spec, seed):
    return RandomNetworkScorer(
        hidden=tuple(spec.layer_sizes[1:-1]), activation=spec.activation, random_state=seed
    )._init(dim, spec)


def nnpu_default_config(seed=0):
    return TrainConfig(learning_rate=0.05, epochs=50, batch_size=128, lambda_=1e-4,
                       momentum=0.9, seed=seed, lr_decay=0.995)


__all__ = [
    "ElkanNotoClassifier",
    "NNPUClassifier",
    "Network",
    "RandomNetworkScorer",
    "nnpu_default_config",
    "nnpu_risk_and_grad",
    "random_scorer",
    "train_en",
    "train_nnpu_mlp",
]
