"""Command-line entry point: ``puoc <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import pickle
import sys
from pathlib import Path

import numpy as np

from . import bench, reliability
from .datasets import (
    SCENARIOS,
    PuView,
    generate,
    load_csv_dataset,
    load_csv_test,
    named_scenario,
    write_csv_dataset,
    write_csv_test,
)
from .models import MlpSpec, random_scorer
from .stats import roc_auc

OUTPUT_ENV = "PUOC_OUTPUT_DIR"

EPILOG = f"""\
environment:
  {OUTPUT_ENV}  default directory for files written by gen, train and bench
                   when no explicit output path is given (default: current directory)
"""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage, which is what we want;
    # this only makes sure the full usage text goes along with the message
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _out_dir():
    return Path(os.environ.get(OUTPUT_ENV) or ".")


def _out_path(arg, default_name):
    return Path(arg) if arg else _out_dir() / default_name


def _param(text):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _prior(text):
    if text in ("true", "estimate"):
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha must be a number in (0, 1] or 'estimate', got {text!r}") from None
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1], got {v}")
    return v


def cmd_gen(args):
    overrides = {k: v for k, v in (("alpha", args.alpha), ("n_unlabeled", args.n_unlabeled),
                                   ("n_pos_labeled", args.n_labeled), ("n_test_per_class", args.n_test))
                 if v is not None}
    spec = named_scenario(args.scenario, seed=args.seed, **overrides)
    train, test_pos, test_neg = generate(spec)
    out = Path(args.out) if args.out else _out_dir()
    out.mkdir(parents=True, exist_ok=True)
    write_csv_dataset(train, out / "train.csv")
    write_csv_test(test_pos, test_neg, out / "test.csv")
    print(f"wrote {out / 'train.csv'} and {out / 'test.csv'}")
    return 0


def _view(path):
    return load_csv_dataset(path).trainer_view()


def cmd_train(args):
    params = dict(args.param or [])
    if args.alpha is not None:
        params["alpha"] = args.alpha
    mspec = bench.ModelSpec.from_dict({"id": args.model, "params": params})
    if bench.MODEL_KINDS[mspec.kind][1] and "alpha" not in params:
        raise ValueError(f"model {mspec.kind!r} needs --alpha (a number or 'estimate')")
    est, alpha_hat = bench.fit_model(mspec, _view(args.train), None, args.seed)
    out = _out_path(args.out, f"{mspec.id}.pkl")
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("wb") as fh:
        pickle.dump(est, fh)
    msg = f"saved {mspec.kind} scorer to {out}"
    if alpha_hat is not None:
        msg += f" (alpha_hat={alpha_hat:.6g})"
    print(msg)
    return 0


def _load_model(path):
    # pickle runs code on load; only open model files you wrote yourself
    with Path(path).open("rb") as fh:
        est = pickle.load(fh)
    if not hasattr(est, "decision_function"):
        raise ValueError(f"{path} does not hold a scorer")
    return est


def cmd_eval(args):
    est = _load_model(args.model)
    X, y = load_csv_test(args.test)
    if y.min() == y.max():
        raise ValueError("test file needs both classes")
    auc = roc_auc(est.decision_function(X[y == 1]), est.decision_function(X[y == 0]))
    print(f"auc={auc:.6f}")
    return 0


def _halves(X, rng):
    perm = rng.permutation(len(X))
    return X[perm[: len(X) // 2]], X[perm[len(X) // 2:]]


def _scorer_for_detect(args, view):
    """Returns the scorer and the view the test runs on.

    A PU-SVM trained here sees only half of each sample; the test runs on
    the other half, so the score distributions are not inflated by fitting.
    """
    if args.model:
        return _load_model(args.model), view
    if args.random:
        return random_scorer(view.dim, MlpSpec((view.dim, 16, 1)), args.seed), view
    rng = np.random.default_rng(args.seed)
    pos_fit, pos_test = _halves(view.positive, rng)
    unl_fit, unl_test = _halves(view.unlabeled, rng)
    mspec = bench.ModelSpec.from_dict({"id": "pu-svm", "params": {"alpha": args.alpha}})
    est = bench.fit_model(mspec, PuView(pos_fit, unl_fit), None, args.seed)[0]
    return est, PuView(pos_test, unl_test)


def cmd_detect(args):
    scorer, view = _scorer_for_detect(args, _view(args.train))
    if args.calibrate:
        p_crit = reliability.calibrate_p_crit(scorer, view.positive, args.seed)
    elif args.p_crit is not None:
        p_crit = args.p_crit
    elif args.mode == "high-alpha":
        p_crit = reliability.DEFAULT_P_CRIT
    else:
        raise ValueError("shift mode needs --p-crit or --calibrate")
    if args.mode == "high-alpha":
        v = reliability.detect_high_alpha(scorer, view.positive, view.unlabeled, p_crit)
    else:
        if not args.test:
            raise ValueError("shift mode needs --test (test-time unlabeled CSV)")
        X_test, _ = load_csv_test(args.test)
        v = reliability.detect_negative_shift(scorer, view.unlabeled, X_test, p_crit)
    print(f"mode={v.mode.value} p_value={v.p_value:.6g} p_crit={v.p_crit:.6g} "
          f"unreliable={str(v.unreliable).lower()}")
    print(f"recommendation: {v.recommendation.value}")
    return 0


def cmd_bench(args):
    if args.config:
        config = bench.load_config(args.config)
    else:
        config = bench.builtin_config(args.scenario, base_seed=args.base_seed)
    if args.repeats is not None:
        config = bench.ExperimentConfig.from_dict({**config.to_dict(), "repeats": args.repeats})
    out = Path(args.out) if args.out else (Path(config.output_path) if config.output_path
                                            else _out_dir() / "results.jsonl")
    records = bench.run_experiment(config, jobs=args.jobs)
    bench.write_results(records, out, timing=config.record_timing or args.timing)
    csv_path = args.csv or config.csv_path
    if csv_path:
        bench.write_results_csv(records, csv_path)
    failed = sum(r.failed for r in records)
    print(f"wrote {len(records)} records to {out}" + (f" ({failed} failed)" if failed else ""))
    for model in dict.fromkeys(r.model for r in records):
        for cell, value in enumerate(config.cells):
            aucs = [r.auc for r in records if r.model == model and r.cell == cell and not r.failed]
            label = "" if value is None else f" [{config.sweep.axis}={value}]"
            if aucs:
                print(f"  {model}{label}: mean auc {np.mean(aucs):.4f} over {len(aucs)} runs")
    return 0


def cmd_compare(args):
    records = bench.read_results(args.results)
    print(bench.compare_models(records, args.a, args.b).summary())
    return 0


def build_parser():
    p = _Parser(prog="puoc", description="PU and one-class learning experiments.",
                epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND", parser_class=_Parser)

    g = sub.add_parser("gen", help="write train.csv and test.csv for a synthetic scenario", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    g.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--alpha", type=float)
    g.add_argument("--n-unlabeled", type=int)
    g.add_argument("--n-labeled", type=int)
    g.add_argument("--n-test", type=int, help="test points per class")
    g.add_argument("--out", help="output directory")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="fit one model on a train CSV and pickle it", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    t.add_argument("--train", required=True)
    t.add_argument("--model", required=True, choices=sorted(bench.MODEL_KINDS))
    t.add_argument("--alpha", type=_prior, help="class prior, or 'estimate' for the density-ratio estimate")
    t.add_argument("--param", type=_param, action="append", metavar="KEY=VALUE",
                   help="estimator hyperparameter (repeatable)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", help="model file (default: $%s/<model>.pkl)" % OUTPUT_ENV)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="AUC of a saved model on a test CSV")
    e.add_argument("--model", required=True)
    e.add_argument("--test", required=True)
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("detect", help="check whether the unlabeled data is reliable")
    d.add_argument("--mode", required=True, choices=["high-alpha", "shift"])
    d.add_argument("--train", required=True)
    d.add_argument("--test", help="test-time CSV whose rows form the new unlabeled sample (shift mode)")
    src = d.add_mutually_exclusive_group()
    src.add_argument("--model", help="saved scorer; default trains a linear PU-SVM")
    src.add_argument("--random", action="store_true", help="use a randomly initialized network")
    d.add_argument("--alpha", type=_prior, default=0.5, help="prior for the default PU-SVM (default 0.5)")
    crit = d.add_mutually_exclusive_group()
    crit.add_argument("--p-crit", type=float)
    crit.add_argument("--calibrate", action="store_true", help="estimate p_crit from a random split of the positives")
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_detect)

    b = sub.add_parser("bench", help="run an experiment config", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    which = b.add_mutually_exclusive_group(required=True)
    which.add_argument("--config", help="JSON experiment config")
    which.add_argument("--scenario", choices=bench.BUILTIN_CONFIGS, help="built-in config")
    b.add_argument("--repeats", type=int)
    b.add_argument("--base-seed", type=int, default=0, help="for built-in configs")
    b.add_argument("--out", help="results file (JSON lines)")
    b.add_argument("--csv", help="also write a flat CSV projection here")
    b.add_argument("--jobs", type=int, default=1, help="worker processes")
    b.add_argument("--timing", action="store_true", help="include wall_time_ms in the results file")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("compare", help="paired Wilcoxon test between two models in a results file")
    c.add_argument("--results", required=True)
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, pickle.UnpicklingError) as exc:
        print(f"puoc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
