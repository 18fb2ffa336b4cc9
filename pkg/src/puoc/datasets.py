"""PU datasets, SCAR sampling, the synthetic Gaussian scenarios and CSV I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core_math import check_alpha


def as_points(X, name="X", dim=None):
    """Validate a 2-D array of finite points."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if dim is None or X.size == dim else X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-D array of points")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"{name} has dimension {X.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or Inf")
    return X


@dataclass(frozen=True)
class PuView:
    """What a trainer is allowed to see: labeled positives and unlabeled points."""

    positive: np.ndarray
    unlabeled: np.ndarray

    @property
    def dim(self):
        return self.positive.shape[1]

    def to_Xs(self):
        """Stack into ``(X, s)`` with ``s = 1`` for labeled, ``0`` for unlabeled rows."""
        X = np.vstack([self.positive, self.unlabeled])
        s = np.concatenate([np.ones(len(self.positive), int), np.zeros(len(self.unlabeled), int)])
        return X, s


@dataclass(frozen=True)
class PuDataset:
    positive: np.ndarray
    unlabeled: np.ndarray
    latent_labels: np.ndarray | None = None
    alpha_true: float | None = None

    def __post_init__(self):
        pos = as_points(self.positive, "positive")
        unl = as_points(self.unlabeled, "unlabeled", dim=pos.shape[1])
        object.__setattr__(self, "positive", pos)
        object.__setattr__(self, "unlabeled", unl)
        if self.latent_labels is not None:
            lat = np.asarray(self.latent_labels).astype(int)
            if lat.shape != (len(unl),):
                raise ValueError("latent_labels must align with the unlabeled sample")
            if not np.all((lat == 0) | (lat == 1)):
                raise ValueError("latent_labels must be 0 or 1")
            object.__setattr__(self, "latent_labels", lat)
        if self.alpha_true is not None:
            object.__setattr__(self, "alpha_true", check_alpha(self.alpha_true))

    @property
    def dim(self):
        return self.positive.shape[1]

    def trainer_view(self):
        return PuView(self.positive, self.unlabeled)

    def to_Xs(self):
        return self.trainer_view().to_Xs()


@dataclass(frozen=True)
class Mode:
    mean: tuple
    cov_diag: tuple
    weight: float = 1.0


@dataclass(frozen=True)
class ScenarioSpec:
    positive_modes: tuple
    negative_modes: tuple
    n_pos_labeled: int = 1000
    n_unlabeled: int = 2000
    alpha: float = 0.5
    test_negative_modes: tuple | None = None
    n_test_per_class: int = 1000
    seed: int = 0

    def __post_init__(self):
        for name in ("positive_modes", "negative_modes", "test_negative_modes"):
            modes = getattr(self, name)
            if modes is None:
                continue
            modes = tuple(m if isinstance(m, Mode) else Mode(*m) for m in modes)
            object.__setattr__(self, name, modes)
            _check_modes(modes, name)
        dims = {len(m.mean) for m in self.positive_modes + self.negative_modes}
        if self.test_negative_modes:
            dims |= {len(m.mean) for m in self.test_negative_modes}
        if len(dims) != 1:
            raise ValueError("all modes must share one dimension")
        check_alpha(self.alpha)
        for name in ("n_pos_labeled", "n_unlabeled", "n_test_per_class"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def dim(self):
        return len(self.positive_modes[0].mean)

    def with_(self, **changes):
        return replace(self, **changes)


def _check_modes(modes, name):
    if not modes:
        raise ValueError(f"{name} must list at least one mode")
    for m in modes:
        if len(m.mean) != len(m.cov_diag):
            raise ValueError(f"{name}: mean and covariance lengths differ")
        if any(c <= 0 for c in m.cov_diag):
            raise ValueError(f"{name}: covariance entries must be positive")
        if m.weight < 0:
            raise ValueError(f"{name}: negative mode weight")
    if not math.isclose(sum(m.weight for m in modes), 1.0, abs_tol=1e-9):
        raise ValueError(f"{name}: mode weights must sum to 1")


def sample_mixture(modes, n, rng):
    """Draw ``n`` points from a diagonal Gaussian mixture."""
    weights = np.array([m.weight for m in modes], dtype=float)
    counts = rng.multinomial(n, weights / weights.sum())
    parts = [
        rng.normal(np.asarray(m.mean, float), np.sqrt(np.asarray(m.cov_diag, float)), size=(c, len(m.mean)))
        for m, c in zip(modes, counts)
    ]
    X = np.vstack(parts)
    return X[rng.permutation(n)]


def scar_sample(pos_pool, neg_pool, n_labeled, n_unlabeled, alpha, seed):
    """Case-control PU sample under the SCAR assumption.

    Labeled positives and the positive part of the unlabeled sample are drawn
    without replacement from disjoint parts of ``pos_pool``; the number of
    latent positives in the unlabeled sample is Binomial(n_unlabeled, alpha).
    """
    alpha = check_alpha(alpha)
    pos_pool = as_points(pos_pool, "pos_pool")
    neg_pool = as_points(neg_pool, "neg_pool", dim=pos_pool.shape[1]) if len(neg_pool) else np.empty((0, pos_pool.shape[1]))
    rng = np.random.default_rng(seed)
    n_up = int(rng.binomial(n_unlabeled, alpha))
    n_un = n_unlabeled - n_up
    if n_labeled + n_up > len(pos_pool):
        raise ValueError(f"positive pool has {len(pos_pool)} points, need {n_labeled + n_up}")
    if n_un > len(neg_pool):
        raise ValueError(f"negative pool has {len(neg_pool)} points, need {n_un}")
    pos_idx = rng.permutation(len(pos_pool))
    labeled = pos_pool[pos_idx[:n_labeled]]
    unl_pos = pos_pool[pos_idx[n_labeled : n_labeled + n_up]]
    unl_neg = neg_pool[rng.permutation(len(neg_pool))[:n_un]]
    unlabeled = np.vstack([unl_pos, unl_neg])
    latent = np.concatenate([np.ones(n_up, int), np.zeros(n_un, int)])
    order = rng.permutation(n_unlabeled)
    return PuDataset(labeled, unlabeled[order], latent[order], alpha)


def draw_unlabeled(pos_pool, neg_pool, n, alpha, seed):
    """An unlabeled mixture of ``n`` points with Binomial(n, alpha) positives.

    Returns ``(X, latent_labels)``.
    """
    alpha = check_alpha(alpha)
    rng = np.random.default_rng(seed)
    n_pos = int(rng.binomial(n, alpha))
    if n_pos > len(pos_pool) or n - n_pos > len(neg_pool):
        raise ValueError("pools too small for the requested mixture")
    X = np.vstack([
        np.asarray(pos_pool, float)[rng.permutation(len(pos_pool))[:n_pos]],
        np.asarray(neg_pool, float)[rng.permutation(len(neg_pool))[: n - n_pos]],
    ])
    y = np.concatenate([np.ones(n_pos, int), np.zeros(n - n_pos, int)])
    order = rng.permutation(n)
    return X[order], y[order]


def _generate(spec):
    # independent streams so the shift override never perturbs the training draw
    pool_rng, scar_seed, test_rng = np.random.default_rng(spec.seed).spawn(3)
    n_pos = spec.n_pos_labeled + spec.n_unlabeled
    pos_pool = sample_mixture(spec.positive_modes, n_pos, pool_rng)
    neg_pool = sample_mixture(spec.negative_modes, spec.n_unlabeled, pool_rng)
    train = scar_sample(
        pos_pool, neg_pool, spec.n_pos_labeled, spec.n_unlabeled, spec.alpha,
        int(scar_seed.integers(2**63)),
    )
    test_modes = spec.test_negative_modes or spec.negative_modes
    test_pos = sample_mixture(spec.positive_modes, spec.n_test_per_class, test_rng)
    test_neg = sample_mixture(test_modes, spec.n_test_per_class, test_rng)
    return train, test_pos, test_neg


def gen_two_gaussian_scenario(spec):
    """One positive and one negative Gaussian; optional test-time negative shift."""
    if len(spec.positive_modes) != 1 or len(spec.negative_modes) != 1:
        raise ValueError("two-Gaussian scenario needs exactly one positive and one negative mode")
    return _generate(spec)


def gen_multimodal_scenario(spec):
    """Multimodal positive mixture against the given negative modes."""
    if len(spec.positive_modes) < 1:
        raise ValueError("need at least one positive mode")
    return _generate(spec)


def fig1_spec(shift=False, *, alpha=0.5, n_pos_labeled=1000, n_unlabeled=2000, n_test_per_class=1000, seed=0):
    """Positives at the origin, negatives at (4, 0); the shift moves test negatives to (-4, 0)."""
    return ScenarioSpec(
        positive_modes=(Mode((0.0, 0.0), (1.0, 1.0)),),
        negative_modes=(Mode((4.0, 0.0), (1.0, 1.0)),),
        n_pos_labeled=n_pos_labeled,
        n_unlabeled=n_unlabeled,
        alpha=alpha,
        test_negative_modes=(Mode((-4.0, 0.0), (1.0, 1.0)),) if shift else None,
        n_test_per_class=n_test_per_class,
        seed=seed,
    )


def fig3_spec(*, alpha=0.5, n_pos_labeled=1000, n_unlabeled=2000, n_test_per_class=1000, seed=0):
    """Four positive modes at (+-4, +-4) around a negative mode at the origin."""
    corners = [(4.0, 4.0), (4.0, -4.0), (-4.0, 4.0), (-4.0, -4.0)]
    return ScenarioSpec(
        positive_modes=tuple(Mode(c, (1.0, 1.0), 0.25) for c in corners),
        negative_modes=(Mode((0.0, 0.0), (1.0, 1.0)),),
        n_pos_labeled=n_pos_labeled,
        n_unlabeled=n_unlabeled,
        alpha=alpha,
        n_test_per_class=n_test_per_class,
        seed=seed,
    )


def sweep_spec(*, alpha=0.5, n_pos_labeled=1000, n_unlabeled=2000, n_test_per_class=1000, seed=0, dim=20, gap=2.0):
    """Overlapping classes in ``dim`` dimensions for the alpha and size sweeps.

    Positives N(0, I), negatives N(gap e_1, I). Unlike the two-dimensional
    named scenarios, here the PU estimate is noisy enough that the number of
    latent negatives visibly limits accuracy.
    """
    neg = np.zeros(dim)
    neg[0] = gap
    return ScenarioSpec(
        positive_modes=(Mode(tuple(np.zeros(dim)), tuple(np.ones(dim))),),
        negative_modes=(Mode(tuple(neg), tuple(np.ones(dim))),),
        n_pos_labeled=n_pos_labeled,
        n_unlabeled=n_unlabeled,
        alpha=alpha,
        n_test_per_class=n_test_per_class,
        seed=seed,
    )


def mirrored_shift(spec):
    """Move test negatives to the mirror image of the training negatives."""
    return spec.with_(test_negative_modes=tuple(
        Mode(tuple(-float(v) for v in m.mean), m.cov_diag, m.weight) for m in spec.negative_modes
    ))


SCENARIOS = {
    "fig1": lambda **kw: fig1_spec(False, **kw),
    "fig1-shift": lambda **kw: fig1_spec(True, **kw),
    "fig3": fig3_spec,
    "sweep": sweep_spec,
}


def named_scenario(name, **overrides):
    try:
        factory = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    return factory(**overrides)


def generate(spec):
    """Dispatch on the number of positive modes."""
    if len(spec.positive_modes) == 1 and len(spec.negative_modes) == 1:
        return gen_two_gaussian_scenario(spec)
    return gen_multimodal_scenario(spec)


# --- CSV -------------------------------------------------------------------


class CsvFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CsvSchema:
    features: tuple | None = None  # default: every f<k> column in order
    role: str = "s"
    latent: str = "y_latent"
    label: str = "y"


def _fmt(x):
    return format(float(x), ".17g")


def _feature_names(dim):
    return [f"f{k}" for k in range(dim)]


def write_csv_dataset(dataset, path):
    """Write a PU training file: features, role ``s`` and ``y_latent`` when known."""
    path = Path(path)
    names = _feature_names(dataset.dim)
    has_latent = dataset.latent_labels is not None
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["s"] + (["y_latent"] if has_latent else []))
        for x in dataset.positive:
            w.writerow([_fmt(v) for v in x] + ["p"] + ([""] if has_latent else []))
        for i, x in enumerate(dataset.unlabeled):
            row = [_fmt(v) for v in x] + ["u"]
            if has_latent:
                row.append(str(int(dataset.latent_labels[i])))
            w.writerow(row)


def write_csv_test(X_pos, X_neg, path):
    """Write a labeled test file with label column ``y``."""
    X_pos = as_points(X_pos, "X_pos")
    X_neg = as_points(X_neg, "X_neg", dim=X_pos.shape[1])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_feature_names(X_pos.shape[1]) + ["y"])
        for X, y in ((X_pos, "1"), (X_neg, "0")):
            for x in X:
                w.writerow([_fmt(v) for v in x] + [y])


def _read_rows(path, schema):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        features = list(schema.features) if schema.features else sorted(
            (h for h in header if h.startswith("f") and h[1:].isdigit()), key=lambda h: int(h[1:])
        )
        if not features:
            raise CsvFormatError(f"{path}: no feature columns")
        missing = [f for f in features if f not in header]
        if missing:
            raise CsvFormatError(f"{path}: missing columns {missing}")
        col = {h: i for i, h in enumerate(header)}
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}"
                )
            try:
                x = [float(row[col[f]]) for f in features]
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in x):
                raise CsvFormatError(f"{path}:{lineno}: non-finite feature value")
            rows.append((lineno, x, {h: row[i].strip() for h, i in col.items()}))
    return features, rows


def load_csv_dataset(path, schema=None):
    """Load a PU training file (role column in {p, u})."""
    schema = schema or CsvSchema()
    features, rows = _read_rows(path, schema)
    pos, unl, latent = [], [], []
    for lineno, x, cells in rows:
        if schema.role not in cells:
            raise CsvFormatError(f"{path}: no role column {schema.role!r}")
        role = cells[schema.role]
        if role == "p":
            pos.append(x)
        elif role == "u":
            unl.append(x)
            lat = cells.get(schema.latent, "")
            if lat not in ("", "0", "1"):
                raise CsvFormatError(f"{path}:{lineno}: bad latent label {lat!r}")
            latent.append(int(lat) if lat else None)
        else:
            raise CsvFormatError(f"{path}:{lineno}: unknown role {role!r}")
    if not pos or not unl:
        raise CsvFormatError(f"{path}: need both labeled (p) and unlabeled (u) rows")
    has_latent = latent and all(v is not None for v in latent)
    return PuDataset(
        np.array(pos), np.array(unl),
        np.array(latent, int) if has_latent else None,
    )


def load_csv_test(path, schema=None):
    """Load a labeled test file; returns ``(X, y)`` with ``y`` in {0, 1}."""
    schema = schema or CsvSchema()
    features, rows = _read_rows(path, schema)
    X, y = [], []
    for lineno, x, cells in rows:
        lab = cells.get(schema.label)
        if lab not in ("0", "1"):
            raise CsvFormatError(f"{path}:{lineno}: label must be 0 or 1, got {lab!r}")
        X.append(x)
        y.append(int(lab))
    if not X:
        raise CsvFormatError(f"{path}: no rows")
    return np.array(X), np.array(y)
