"""End-to-end acceptance criteria.

Each test prints one ``criterion N: PASS|FAIL`` line (also collected into
the pytest terminal summary) and then asserts the same condition.
"""

import time

import numpy as np
import pytest

from puoc.bench import builtin_config, run_experiment, write_results
from puoc.cli import main as cli_main
from puoc.core_math import LossKind, loss_eval, risk_pn, risk_pu_unbiased
from puoc.datasets import PuDataset, draw_unlabeled, fig1_spec, generate, scar_sample
from puoc.models import (
    PUSVM,
    MlpSpec,
    Network,
    TrainConfig,
    dual_score,
    nnpu_risk_and_grad,
    random_scorer,
    solve_pu_svm_dual,
    train_density_ratio,
    train_pu_svm_sgd,
)
from puoc.core_math import risk_nn
from puoc.reliability import calibrate_p_crit, detect_high_alpha, detect_negative_shift
from puoc.stats import Alternative, mann_whitney_u, roc_auc, wilcoxon_signed_rank

from .oracles import brute_auc, enumerate_mwu_p, enumerate_wilcoxon_p, finite_difference_grads

RESULTS = []
HIGH_ALPHA_GRID = (0.5, 0.75, 0.9, 1.0)
N_SEEDS = 50
FRESH = 10_000  # seed offset for held-out samples drawn from the training distribution


def check(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _means(records):
    out = {}
    for r in records:
        out.setdefault((r.model, r.cell), []).append(r.auc)
    return {k: float(np.mean(v)) for k, v in out.items()}


def test_criterion_01_two_gaussian_scenario():
    t0 = time.perf_counter()
    plain = _means(run_experiment(builtin_config("fig1")))
    shift = _means(run_experiment(builtin_config("fig1-shift")))
    secs = time.perf_counter() - t0
    ok = (plain["oc-svm", 0] >= 0.85 and plain["pu-svm", 0] >= 0.90
          and shift["oc-svm", 0] >= 0.80 and shift["pu-svm", 0] <= 0.30 and secs < 60)
    check(1, ok, f"no shift OC {plain['oc-svm', 0]:.3f} PU {plain['pu-svm', 0]:.3f}; "
                 f"shift OC {shift['oc-svm', 0]:.3f} PU {shift['pu-svm', 0]:.3f}; {secs:.1f}s")


def test_criterion_02_four_mode_scenario():
    t0 = time.perf_counter()
    m = _means(run_experiment(builtin_config("fig3")))
    secs = time.perf_counter() - t0
    ok = m["oc-svm", 0] <= 0.30 and m["pu-svm", 0] >= 0.85 and secs < 60
    check(2, ok, f"OC {m['oc-svm', 0]:.3f} PU {m['pu-svm', 0]:.3f}; {secs:.1f}s")


def test_criterion_03_mixture_cancellation():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        kind = LossKind(rng.choice([k.value for k in LossKind]))
        p = rng.normal(0, 3, int(rng.integers(1, 40)))
        n = rng.normal(0, 3, int(rng.integers(1, 40)))
        alpha = len(p) / (len(p) + len(n))
        u = np.concatenate([p, n])
        worst = max(worst, abs(risk_pu_unbiased(kind, p, u, alpha).total - risk_pn(kind, p, n, alpha)))
    check(3, worst <= 1e-10, f"max |R_pu - R_pn| = {worst:.2e}")


def test_criterion_04_double_hinge_identity():
    t = np.random.default_rng(4).normal(0, 5, 10_000)
    gap = np.max(np.abs(loss_eval(LossKind.DOUBLE_HINGE, 1, t) - loss_eval(LossKind.DOUBLE_HINGE, -1, t) + 2 * t))
    check(4, gap <= 1e-12, f"max deviation {gap:.2e}")


def test_criterion_05_dual_solver():
    worst_res, worst_gap, worst_secs, tau_exact = 0.0, 0.0, 0.0, True
    for seed in range(10):
        train, tp, tn = generate(fig1_spec(seed=seed, n_pos_labeled=10, n_unlabeled=30, n_test_per_class=200))
        t0 = time.perf_counter()
        sol = solve_pu_svm_dual(train, 0.5)
        worst_secs = max(worst_secs, time.perf_counter() - t0)
        worst_res = max(worst_res, max(sol.residuals().values()))
        tau_exact &= bool(np.all(sol.tau[: sol.n_pos] == 0.5 / (2 * sol.n_pos)))
        dual_auc = roc_auc(dual_score(sol, train, "linear", tp), dual_score(sol, train, "linear", tn))
        sgd = train_pu_svm_sgd(train, 0.5, config=TrainConfig(seed=seed), nonnegative=False)
        worst_gap = max(worst_gap, abs(dual_auc - sgd.auc(tp, tn)))
    ok = worst_res <= 1e-6 and tau_exact and worst_gap <= 0.05 and worst_secs < 10
    check(5, ok, f"max residual {worst_res:.1e}, tau exact {tau_exact}, "
                 f"max AUC gap {worst_gap:.3f}, slowest {worst_secs:.2f}s")


def test_criterion_06_nnpu_gradient_check():
    worst = 0.0
    for layers, act, seed in [((2, 5, 1), "tanh", 0), ((3, 4, 3, 1), "tanh", 1), ((2, 6, 1), "relu", 2)]:
        rng = np.random.default_rng(seed)
        net = Network(MlpSpec(layers, act), rng)
        Xp, Xu = rng.normal(size=(5, layers[0])), rng.normal(size=(7, layers[0]))
        _, grads = nnpu_risk_and_grad(net, Xp, Xu, 0.4)
        fds = finite_difference_grads(
            net.params, lambda: risk_nn(LossKind.SIGMOID, net.forward(Xp), net.forward(Xu), 0.4).total)
        for g, fd in zip(grads, fds):
            worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g) + np.linalg.norm(fd), 1e-12))
    check(6, worst < 1e-4, f"max relative error {worst:.1e}")


def test_criterion_07_rank_test_oracles():
    rng = np.random.default_rng(7)
    worst_exact = 0.0
    for _ in range(50):
        n1 = int(rng.integers(1, 8))
        n2 = int(rng.integers(1, 13 - n1))
        x = rng.permutation(n1 + n2) + rng.uniform(0, 0.5)
        n = int(rng.integers(2, 13))
        d = (rng.permutation(n) + 1.0) * rng.choice([-1, 1], n)
        for alt in Alternative:
            worst_exact = max(worst_exact, abs(mann_whitney_u(x[:n1], x[n1:], alt).p_value
                                               - enumerate_mwu_p(x[:n1], x[n1:], alt)))
            worst_exact = max(worst_exact, abs(wilcoxon_signed_rank(d, np.zeros(n), alt).p_value
                                               - enumerate_wilcoxon_p(d, alt)))
    worst_normal = 0.0
    for _ in range(50):
        n1 = int(rng.integers(3, 12))
        x = rng.normal(size=14)
        exact = mann_whitney_u(x[:n1], x[n1:], method="exact").p_value
        normal = mann_whitney_u(x[:n1], x[n1:], method="normal").p_value
        worst_normal = max(worst_normal, abs(exact - normal))
    ok = worst_exact <= 1e-12 and worst_normal <= 0.02
    check(7, ok, f"max enumeration gap {worst_exact:.1e}, normal vs exact at 14: {worst_normal:.4f}")


def test_criterion_08_auc_pair_counting():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        pos = rng.integers(0, 8, int(rng.integers(1, 30))).astype(float)
        neg = rng.integers(0, 8, int(rng.integers(1, 30))).astype(float)
        worst = max(worst, abs(roc_auc(pos, neg) - brute_auc(pos, neg)))
    check(8, worst <= 1e-12, f"max gap {worst:.1e}")


# --- reliability simulations -------------------------------------------------

@pytest.fixture(scope="module")
def trained():
    """PU-SVM per (alpha, seed) on the canonical scenario, plus held-out samples."""
    t0 = time.perf_counter()
    out = {}
    for alpha in HIGH_ALPHA_GRID:
        for seed in range(N_SEEDS):
            train, _, _ = generate(fig1_spec(alpha=alpha, seed=seed))
            est = PUSVM(alpha=alpha, random_state=seed).fit(*train.to_Xs())
            fresh, _, _ = generate(fig1_spec(alpha=alpha, seed=seed + FRESH))
            out[alpha, seed] = (est, fresh)
    return out, time.perf_counter() - t0


def test_criterion_09_high_alpha_detection(trained):
    fits, fit_secs = trained
    t0 = time.perf_counter()
    p = {a: [] for a in HIGH_ALPHA_GRID}
    for (alpha, seed), (est, fresh) in fits.items():
        p[alpha].append(detect_high_alpha(est, fresh.positive, fresh.unlabeled).p_value)
    secs = fit_secs + time.perf_counter() - t0
    rate = {a: float(np.mean(np.array(v) > 0.1)) for a, v in p.items()}
    med = [float(np.median(p[a])) for a in HIGH_ALPHA_GRID]
    ok = rate[1.0] >= 0.8 and rate[0.5] <= 0.2 and all(np.diff(med) >= 0) and secs < 300
    check(9, ok, f"unreliable rate at 1.0: {rate[1.0]:.2f}, at 0.5: {rate[0.5]:.2f}; "
                 f"medians {', '.join(f'{m:.2g}' for m in med)}; {secs:.0f}s")


def test_criterion_10_shift_detection(trained):
    fits, _ = trained
    detected = {}
    for alpha in (0.5, 0.75):
        for shifted in (True, False):
            hits = 0
            for seed in range(N_SEEDS):
                est, fresh = fits[alpha, seed]
                _, tp, tn = generate(fig1_spec(shift=shifted, alpha=alpha, seed=seed))
                unl_test, _ = draw_unlabeled(tp, tn, 1000, alpha, seed)
                p_crit = calibrate_p_crit(est, fresh.positive, seed)
                hits += detect_negative_shift(est, fresh.unlabeled, unl_test, p_crit).unreliable
            detected[alpha, shifted] = hits / N_SEEDS
    ok = all(detected[a, True] >= 0.8 and detected[a, False] <= 0.2 for a in (0.5, 0.75))
    check(10, ok, "; ".join(f"alpha {a}: shift {detected[a, True]:.2f}, none {detected[a, False]:.2f}"
                            for a in (0.5, 0.75)))


def test_criterion_11_random_scorer_detection():
    flagged = 0
    for seed in range(100):
        train, _, _ = generate(fig1_spec(alpha=1.0, seed=seed))
        scorer = random_scorer(2, MlpSpec((2, 16, 1)), seed)
        p_crit = calibrate_p_crit(scorer, train.positive, seed)
        flagged += detect_high_alpha(scorer, train.positive, train.unlabeled, p_crit).unreliable
    check(11, flagged >= 60, f"unreliable in {flagged}/100 seeds")


def test_criterion_12_sweeps():
    a = _means(run_experiment(builtin_config("alpha-sweep")))
    s = _means(run_experiment(builtin_config("size-sweep")))
    pu = [a["pu-svm", c] for c in range(3)]
    oc = [a["oc-svm", c] for c in range(3)]
    gain = s["pu-svm", 2] - s["pu-svm", 0]
    ok = all(np.diff(pu) <= 0) and max(oc) - min(oc) < 0.05 and gain >= 0.05
    check(12, ok, f"PU over alpha {', '.join(f'{x:.3f}' for x in pu)}; OC range {max(oc) - min(oc):.3f}; "
                  f"PU gain 50 -> 2000 unlabeled {gain:.3f}")


def test_criterion_13_scar_sampler():
    rng = np.random.default_rng(13)
    pos, neg = rng.normal(size=(2000, 2)), rng.normal(4, 1, size=(2000, 2))
    n, alpha = 1000, 0.6
    sd = np.sqrt(n * alpha * (1 - alpha))
    inside = sum(abs(scar_sample(pos, neg, 100, n, alpha, s).latent_labels.sum() - n * alpha) <= 3 * sd
                 for s in range(200))
    check(13, inside >= 190, f"{inside}/200 draws within 3 sd")


def test_criterion_14_density_ratio_prior():
    rng = np.random.default_rng(14)
    P = rng.normal(size=(3000, 2))
    _, same = train_density_ratio(PuDataset(P[:1000], P[1000:]))
    train, tp, tn = generate(fig1_spec(seed=14))
    est, sep = train_density_ratio(train)
    invariant = roc_auc(est.decision_function(tp), est.decision_function(tn)) == roc_auc(
        est.density_ratio(tp), est.density_ratio(tn))
    ok = 0.8 <= same <= 1.0 and 0.5 <= sep <= 0.75 and invariant
    check(14, ok, f"alpha_hat same-distribution {same:.3f}, separated {sep:.3f}, AUC invariant {invariant}")


def test_criterion_15_bench_determinism(tmp_path):
    paths = [tmp_path / f"run{i}.jsonl" for i in range(2)]
    for p in paths:
        assert cli_main(["bench", "--scenario", "fig1", "--repeats", "3", "--out", str(p)]) == 0
    ok = paths[0].read_bytes() == paths[1].read_bytes()
    # a reversed row order is normalized on write
    write_results(list(reversed(run_experiment(builtin_config("fig1", repeats=3)))), tmp_path / "rev.jsonl")
    ok = ok and (tmp_path / "rev.jsonl").read_bytes() == paths[0].read_bytes()
    check(15, ok, "identical results files" if ok else "results files differ")
