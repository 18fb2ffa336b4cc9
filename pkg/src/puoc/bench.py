"""Config-driven experiments: scenarios x models x repeats, and paired comparison.

Every (sweep cell, repeat) task derives its own seed from
``(base_seed, cell index, repeat index)`` so tasks are independent and the
output is the same whatever order (or process) they run in. Records are
sorted by (model, cell, repeat) before writing.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import reliability
from .datasets import (
    PuView,
    draw_unlabeled,
    generate,
    load_csv_dataset,
    load_csv_test,
    mirrored_shift,
    named_scenario,
)
from .models import (
    PUSVM,
    DensityRatioPU,
    ElkanNotoClassifier,
    NNPUClassifier,
    OneClassSVM,
    PUSVMDual,
)
from .stats import UndefinedTestError, roc_auc, wilcoxon_signed_rank

log = logging.getLogger(__name__)

SIGNIFICANCE = 0.05
SWEEP_AXES = ("alpha", "n_unlabeled", "shift")

# kind -> (estimator class, whether it takes a class prior, fits on positives only)
MODEL_KINDS = {
    "oc-svm": (OneClassSVM, False, True),
    "pu-svm": (PUSVM, True, False),
    "pu-svm-dual": (PUSVMDual, True, False),
    "nnpu": (NNPUClassifier, True, False),
    "en": (ElkanNotoClassifier, False, False),
    "drpu": (DensityRatioPU, False, False),
}

# reference settings per named scenario; RBF widths chosen for the
# canonical geometry (wide OC envelope, PU boundary around the center)
PRESETS = {
    "fig1": [
        {"id": "oc-svm", "params": {"kernel": "rbf", "gamma": 0.02, "nu": 0.5}},
        {"id": "pu-svm", "params": {"kernel": "linear"}},
    ],
    "fig3": [
        {"id": "oc-svm", "params": {"kernel": "rbf", "gamma": 0.02, "nu": 0.5}},
        {"id": "pu-svm", "params": {"kernel": "rbf", "gamma": 0.1}},
    ],
}
PRESETS["fig1-shift"] = PRESETS["fig1"]
PRESETS["sweep"] = PRESETS["fig1"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    id: str
    kind: str
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, str):
            d = {"id": d}
        kind = d.get("kind", d.get("id"))
        if kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {kind!r}; choose from {sorted(MODEL_KINDS)}")
        params = dict(d.get("params", {}))
        est_cls, takes_alpha, _ = MODEL_KINDS[kind]
        valid = set(est_cls().get_params()) - {"random_state"}
        bad = set(params) - valid - ({"alpha"} if takes_alpha else set())
        if bad:
            raise ConfigError(f"model {d.get('id', kind)!r}: unknown parameters {sorted(bad)}")
        alpha = params.get("alpha", "true")
        if takes_alpha and not (alpha in ("true", "estimate") or _is_prior(alpha)):
            raise ConfigError(f"model {kind!r}: alpha must be 'true', 'estimate' or a number in (0, 1]")
        return cls(str(d.get("id", kind)), kind, params)


def _is_prior(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and 0 < x <= 1


@dataclass(frozen=True)
class Sweep:
    axis: str
    values: tuple

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; choose from {SWEEP_AXES}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        for v in self.values:
            if self.axis == "alpha" and not _is_prior(v):
                raise ConfigError(f"alpha sweep value {v!r} outside (0, 1]")
            if self.axis == "n_unlabeled" and not (isinstance(v, int) and v >= 1):
                raise ConfigError(f"n_unlabeled sweep value {v!r} must be a positive integer")
            if self.axis == "shift" and not isinstance(v, bool):
                raise ConfigError(f"shift sweep value {v!r} must be true or false")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment description.

    ``scenario`` is either ``{"name": ..., "params": {...}}`` for a built-in
    generator or ``{"train_csv": ..., "test_csv": ...}`` for fixed data.
    """

    scenario: dict
    models: tuple
    repeats: int = 10
    base_seed: int = 0
    sweep: Sweep | None = None
    output_path: str | None = None
    csv_path: str | None = None
    detect: bool = False
    record_timing: bool = False

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be an object")
        known = {"scenario", "models", "repeats", "base_seed", "sweep", "output_path", "csv_path",
                 "detect", "record_timing"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        scenario = d.get("scenario")
        if isinstance(scenario, str):
            scenario = {"name": scenario}
        if not isinstance(scenario, dict):
            raise ConfigError("scenario must name a built-in scenario or CSV files")
        if "name" in scenario:
            try:
                named_scenario(scenario["name"], **scenario.get("params", {}))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad scenario: {exc}") from None
        elif not {"train_csv", "test_csv"} <= set(scenario):
            raise ConfigError("CSV scenario needs train_csv and test_csv")
        models = d.get("models") or PRESETS.get(scenario.get("name"))
        if not models:
            raise ConfigError("no models given")
        models = tuple(ModelSpec.from_dict(m) for m in models)
        ids = [m.id for m in models]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate model ids {ids}")
        repeats = d.get("repeats", 10)
        if not isinstance(repeats, int) or repeats < 1:
            raise ConfigError("repeats must be a positive integer")
        base_seed = d.get("base_seed", 0)
        if not isinstance(base_seed, int) or base_seed < 0:
            raise ConfigError("base_seed must be a nonnegative integer")
        sweep = d.get("sweep")
        if sweep is not None:
            sweep = Sweep(sweep.get("axis"), tuple(sweep.get("values", ())))
            if "name" not in scenario:
                raise ConfigError("sweeps need a generated scenario")
        return cls(scenario, models, repeats, base_seed, sweep, d.get("output_path"), d.get("csv_path"),
                   bool(d.get("detect", False)), bool(d.get("record_timing", False)))

    @property
    def cells(self):
        return list(self.sweep.values) if self.sweep else [None]

    def to_dict(self):
        d = {
            "scenario": self.scenario,
            "models": [asdict(m) for m in self.models],
            "repeats": self.repeats,
            "base_seed": self.base_seed,
        }
        if self.sweep:
            d["sweep"] = {"axis": self.sweep.axis, "values": list(self.sweep.values)}
        for k in ("output_path", "csv_path"):
            if getattr(self, k):
                d[k] = getattr(self, k)
        if self.detect:
            d["detect"] = True
        if self.record_timing:
            d["record_timing"] = True
        return d


def load_config(path):
    with Path(path).open(encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return ExperimentConfig.from_dict(raw)


def builtin_config(name, repeats=10, base_seed=0):
    """Ready-made configs: the three named scenarios and the two sweeps."""
    if name in ("fig1", "fig1-shift", "fig3"):
        return ExperimentConfig.from_dict({"scenario": {"name": name}, "repeats": repeats, "base_seed": base_seed})
    if name == "alpha-sweep":
        return ExperimentConfig.from_dict({
            "scenario": {"name": "sweep"}, "repeats": repeats, "base_seed": base_seed,
            "sweep": {"axis": "alpha", "values": [0.5, 0.75, 0.95]},
        })
    if name == "size-sweep":
        return ExperimentConfig.from_dict({
            "scenario": {"name": "sweep"}, "repeats": repeats, "base_seed": base_seed,
            "sweep": {"axis": "n_unlabeled", "values": [50, 500, 2000]},
        })
    raise ConfigError(f"unknown built-in config {name!r}")


BUILTIN_CONFIGS = ("fig1", "fig1-shift", "fig3", "alpha-sweep", "size-sweep")


def derive_seed(base_seed, cell, repeat):
    """64-bit seed, a pure function of (base_seed, cell index, repeat index)."""
    state = np.random.SeedSequence([base_seed, cell, repeat]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


@dataclass(frozen=True)
class ResultRecord:
    model: str
    cell: int
    cell_value: object
    repeat: int
    seed: int
    auc: float | None
    alpha_hat: float | None = None
    wall_time_ms: int = 0
    verdicts: tuple | None = None
    failed: bool = False
    error: str | None = None

    def to_dict(self, timing=True):
        d = {
            "model": self.model, "cell": self.cell, "cell_value": self.cell_value,
            "repeat": self.repeat, "seed": self.seed, "auc": self.auc,
            "alpha_hat": self.alpha_hat, "failed": self.failed,
        }
        if timing:
            d["wall_time_ms"] = self.wall_time_ms
        if self.verdicts is not None:
            d["verdicts"] = [v.to_dict() for v in self.verdicts]
        if self.error:
            d["error"] = self.error
        return d

    @classmethod
    def from_dict(cls, d):
        verdicts = d.get("verdicts")
        if verdicts is not None:
            verdicts = tuple(reliability.ReliabilityVerdict.from_dict(v) for v in verdicts)
        return cls(
            d["model"], int(d["cell"]), d.get("cell_value"), int(d["repeat"]), int(d["seed"]),
            d.get("auc"), d.get("alpha_hat"), int(d.get("wall_time_ms", 0)), verdicts,
            bool(d.get("failed", False)), d.get("error"),
        )

    @property
    def sort_key(self):
        return (self.model, self.cell, self.repeat)


def _cell_spec(config, cell_value, seed):
    spec = named_scenario(config.scenario["name"], **config.scenario.get("params", {}))
    spec = spec.with_(seed=seed)
    if config.sweep is None:
        return spec
    if config.sweep.axis == "alpha":
        return spec.with_(alpha=float(cell_value))
    if config.sweep.axis == "n_unlabeled":
        return spec.with_(n_unlabeled=int(cell_value))
    return mirrored_shift(spec) if cell_value else spec.with_(test_negative_modes=None)


def _load_task_data(config, cell_value, seed):
    """Returns (train view, true alpha or None, test positives, test negatives)."""
    if "name" in config.scenario:
        spec = _cell_spec(config, cell_value, seed)
        train, test_pos, test_neg = generate(spec)
        return train, spec.alpha, test_pos, test_neg
    train = load_csv_dataset(config.scenario["train_csv"])
    X, y = load_csv_test(config.scenario["test_csv"])
    alpha = config.scenario.get("alpha")
    return train, alpha, X[y == 1], X[y == 0]


def fit_model(mspec, view, alpha_true, seed):
    """Fit one model on a trainer view; returns (estimator, alpha_hat or None)."""
    est_cls, takes_alpha, positives_only = MODEL_KINDS[mspec.kind]
    params = dict(mspec.params)
    alpha_hat = None
    if takes_alpha:
        alpha = params.pop("alpha", "true")
        if alpha == "true":
            if alpha_true is None:
                raise ValueError("true class prior unknown; set alpha to a number or 'estimate'")
            alpha = alpha_true
        elif alpha == "estimate":
            X, s = view.to_Xs()
            alpha_hat = DensityRatioPU(random_state=seed).fit(X, s).alpha_hat_
            alpha = alpha_hat
        params["alpha"] = float(alpha)
    est = est_cls(**params)
    if "random_state" in est.get_params():
        est.set_params(random_state=seed)
    if positives_only:
        est.fit(view.positive)
    else:
        est.fit(*view.to_Xs())
    if isinstance(est, DensityRatioPU):
        alpha_hat = est.alpha_hat_
    return est, alpha_hat


def _verdicts(est, view, test_pos, test_neg, alpha, seed):
    high = reliability.detect_high_alpha(est, view.positive, view.unlabeled)
    out = [high]
    if alpha is not None:
        unl_test, _ = draw_unlabeled(test_pos, test_neg, min(len(test_pos), len(test_neg)), alpha, seed)
        p_crit = reliability.calibrate_p_crit(est, view.positive, seed)
        out.append(reliability.detect_negative_shift(est, view.unlabeled, unl_test, p_crit))
    return tuple(out)


def run_task(config, cell, repeat):
    """Train and evaluate every model on one (cell, repeat); never raises for model failures."""
    cell_value = config.cells[cell]
    seed = derive_seed(config.base_seed, cell, repeat)
    train, alpha, test_pos, test_neg = _load_task_data(config, cell_value, seed)
    view = train.trainer_view() if not isinstance(train, PuView) else train
    records = []
    for mspec in config.models:
        t0 = time.perf_counter()
        try:
            est, alpha_hat = fit_model(mspec, view, alpha, seed)
            auc = roc_auc(est.decision_function(test_pos), est.decision_function(test_neg))
            if not math.isfinite(auc):
                raise ValueError("non-finite AUC")
            verdicts = _verdicts(est, view, test_pos, test_neg, alpha, seed) if config.detect else None
            rec = ResultRecord(mspec.id, cell, cell_value, repeat, seed, float(auc), alpha_hat,
                               0, verdicts)
        except Exception as exc:  # noqa: BLE001 - recorded, the run continues
            log.warning("model %s failed on cell %d repeat %d: %s", mspec.id, cell, repeat, exc)
            rec = ResultRecord(mspec.id, cell, cell_value, repeat, seed, None, failed=True,
                               error=f"{type(exc).__name__}: {exc}")
        ms = int(round(1000 * (time.perf_counter() - t0)))
        records.append(ResultRecord(**{**rec.__dict__, "wall_time_ms": ms}))
    return records


def _run_task_star(args):
    return run_task(*args)


def run_experiment(config, jobs=1):
    """Run every (cell, repeat) task; returns records sorted by (model, cell, repeat)."""
    tasks = [(config, c, r) for c in range(len(config.cells)) for r in range(config.repeats)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_task_star, tasks))
    else:
        chunks = [run_task(*t) for t in tasks]
    records = [r for chunk in chunks for r in chunk]
    return sorted(records, key=lambda r: r.sort_key)


def write_results(records, path, timing=False):
    """One JSON object per line, rows sorted by (model, cell, repeat)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in sorted(records, key=lambda r: r.sort_key):
            fh.write(json.dumps(rec.to_dict(timing=timing), sort_keys=True) + "\n")


def write_results_csv(records, path):
    """Flat projection for plotting: model, cell value, repeat, auc, alpha_hat."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "cell", "cell_value", "repeat", "seed", "auc", "alpha_hat", "failed"])
        for r in sorted(records, key=lambda r: r.sort_key):
            w.writerow([r.model, r.cell, json.dumps(r.cell_value), r.repeat, r.seed,
                        "" if r.auc is None else repr(r.auc),
                        "" if r.alpha_hat is None else repr(r.alpha_hat), int(r.failed)])


def read_results(path):
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(ResultRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad record: {exc}") from None
    return records


@dataclass(frozen=True)
class Comparison:
    model_a: str
    model_b: str
    n_pairs: int
    mean_diff: float  # mean of auc_b - auc_a
    report: object | None  # TestReport, None when every difference is zero
    favored: str | None

    @property
    def significant(self):
        return self.favored is not None

    @property
    def p_value(self):
        return 1.0 if self.report is None else self.report.p_value

    def summary(self):
        if self.report is None:
            return (f"no significant difference between {self.model_a} and {self.model_b}: "
                    f"all {self.n_pairs} paired AUC differences are zero")
        head = (f"favored: {self.favored}" if self.favored
                else f"no significant difference between {self.model_a} and {self.model_b}")
        return (f"{head} (p={self.report.p_value:.6g}, W+={self.report.statistic:g}, "
                f"pairs={self.n_pairs}, mean AUC {self.model_b} - {self.model_a} = {self.mean_diff:+.6f})")


def _auc_table(records, model):
    table = {}
    for r in records:
        if r.model != model:
            continue
        if r.failed or r.auc is None:
            raise ValueError(f"model {model!r} failed on cell {r.cell} repeat {r.repeat}")
        key = (r.cell, r.repeat)
        if key in table:
            raise ValueError(f"duplicate record for {model!r} at cell {r.cell} repeat {r.repeat}")
        table[key] = r.auc
    if not table:
        raise ValueError(f"no records for model {model!r}")
    return table


def compare_models(records, model_a, model_b):
    """Paired two-sided Wilcoxon test of AUCs matched by (cell, repeat)."""
    ta, tb = _auc_table(records, model_a), _auc_table(records, model_b)
    if set(ta) != set(tb):
        raise ValueError(f"{model_a!r} and {model_b!r} were not run on the same cells and repeats")
    keys = sorted(ta)
    a = np.array([ta[k] for k in keys])
    b = np.array([tb[k] for k in keys])
    diff = float(np.mean(b - a))
    try:
        report = wilcoxon_signed_rank(b, a)
    except UndefinedTestError:
        if np.count_nonzero(b - a):
            raise
        return Comparison(model_a, model_b, len(keys), diff, None, None)
    favored = None
    if report.p_value < SIGNIFICANCE:
        n = report.n1
        # W+ above its null mean n(n+1)/4 means b tends to be larger
        favored = model_b if report.statistic > n * (n + 1) / 4.0 else model_a
    return Comparison(model_a, model_b, len(keys), diff, report, favored)
