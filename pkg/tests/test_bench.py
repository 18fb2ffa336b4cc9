import json

import pytest

from puoc.bench import (
    BUILTIN_CONFIGS,
    ConfigError,
    ExperimentConfig,
    ResultRecord,
    builtin_config,
    compare_models,
    derive_seed,
    load_config,
    read_results,
    run_experiment,
    run_task,
    write_results,
    write_results_csv,
)

SMALL = {"n_pos_labeled": 100, "n_unlabeled": 200, "n_test_per_class": 100}
FAST_MODELS = [
    {"id": "oc", "kind": "oc-svm", "params": {"epochs": 5}},
    {"id": "pu", "kind": "pu-svm", "params": {"epochs": 5}},
]


def small_config(**extra):
    d = {
        "scenario": {"name": "fig1", "params": SMALL},
        "models": FAST_MODELS,
        "repeats": 10,
        "sweep": {"axis": "alpha", "values": [0.5, 0.75, 0.9]},
    }
    d.update(extra)
    return ExperimentConfig.from_dict(d)


@pytest.fixture(scope="module")
def small_records():
    return run_experiment(small_config())


def _record(model, cell, repeat, auc):
    return ResultRecord(model, cell, None, repeat, derive_seed(0, cell, repeat), auc)


def test_one_record_per_model_cell_repeat(small_records):
    assert len(small_records) == 60
    keys = {r.sort_key for r in small_records}
    assert len(keys) == 60
    assert not any(r.failed for r in small_records)
    assert [r.sort_key for r in small_records] == sorted(keys)


def test_tasks_are_order_independent(small_records):
    cfg = small_config()
    last = run_task(cfg, 2, 9)
    by_key = {r.sort_key: r for r in small_records}
    for r in last:
        assert r.to_dict(timing=False) == by_key[r.sort_key].to_dict(timing=False)


def test_repeated_runs_write_identical_files(tmp_path, small_records):
    cfg = small_config(repeats=2)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_results(run_experiment(cfg), a)
    write_results(list(reversed(run_experiment(cfg))), b)
    assert a.read_bytes() == b.read_bytes()


def test_derive_seed_is_pure_and_distinct():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    seeds = {derive_seed(b, c, r) for b in range(3) for c in range(4) for r in range(10)}
    assert len(seeds) == 120
    assert all(0 <= s < 2**64 for s in seeds)


def test_builtin_configs_parse():
    for name in BUILTIN_CONFIGS:
        cfg = builtin_config(name, repeats=3)
        assert cfg.repeats == 3 and len(cfg.models) == 2
    assert builtin_config("alpha-sweep").cells == [0.5, 0.75, 0.95]
    with pytest.raises(ConfigError):
        builtin_config("fig9")


def test_config_round_trip(tmp_path):
    cfg = small_config()
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert load_config(p) == cfg


@pytest.mark.parametrize(
    "patch, fragment",
    [
        ({"colour": 1}, "unknown config keys"),
        ({"models": [{"id": "svm9"}]}, "unknown model kind"),
        ({"models": [{"id": "pu", "kind": "pu-svm", "params": {"depth": 3}}]}, "unknown parameters"),
        ({"models": [{"id": "pu", "kind": "pu-svm", "params": {"alpha": 1.5}}]}, "alpha must be"),
        ({"models": FAST_MODELS + FAST_MODELS[:1]}, "duplicate model ids"),
        ({"repeats": 0}, "repeats"),
        ({"base_seed": -1}, "base_seed"),
        ({"sweep": {"axis": "depth", "values": [1]}}, "unknown sweep axis"),
        ({"sweep": {"axis": "alpha", "values": [0.0]}}, "outside"),
        ({"sweep": {"axis": "n_unlabeled", "values": [2.5]}}, "positive integer"),
        ({"scenario": {"name": "fig9"}}, "bad scenario"),
        ({"scenario": {"train_csv": "x.csv"}}, "train_csv and test_csv"),
    ],
)
def test_config_errors(patch, fragment):
    with pytest.raises(ConfigError, match=fragment):
        small_config(**patch)


def test_malformed_config_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(p)


def test_failing_model_is_flagged_and_the_run_continues():
    # the dual QP refuses training sets above its size cap
    cfg = ExperimentConfig.from_dict({
        "scenario": {"name": "fig1", "params": SMALL},
        "models": [{"id": "dual", "kind": "pu-svm-dual"}, FAST_MODELS[1]],
        "repeats": 2,
    })
    recs = run_experiment(cfg)
    dual = [r for r in recs if r.model == "dual"]
    assert all(r.failed and r.auc is None and r.error for r in dual)
    assert not any(r.failed for r in recs if r.model == "pu")


def test_csv_scenario(tmp_path):
    from puoc.datasets import fig1_spec, generate, write_csv_dataset, write_csv_test

    train, tp, tn = generate(fig1_spec(seed=1, **SMALL))
    write_csv_dataset(train, tmp_path / "train.csv")
    write_csv_test(tp, tn, tmp_path / "test.csv")
    cfg = ExperimentConfig.from_dict({
        "scenario": {"train_csv": str(tmp_path / "train.csv"), "test_csv": str(tmp_path / "test.csv"),
                     "alpha": 0.5},
        "models": FAST_MODELS, "repeats": 2,
    })
    recs = run_experiment(cfg)
    assert len(recs) == 4 and min(r.auc for r in recs if r.model == "pu") > 0.9


def test_detect_adds_both_verdicts():
    recs = run_experiment(small_config(repeats=1, detect=True, sweep=None))
    for r in recs:
        assert [v.mode.value for v in r.verdicts] == ["HighAlpha", "NegativeShift"]


def test_timing_is_opt_in(tmp_path, small_records):
    p = tmp_path / "r.jsonl"
    write_results(small_records[:3], p)
    assert "wall_time_ms" not in p.read_text()
    write_results(small_records[:3], p, timing=True)
    assert all("wall_time_ms" in json.loads(line) for line in p.read_text().splitlines())


def test_jsonl_round_trip_reproduces_comparison(tmp_path, small_records):
    p = tmp_path / "r.jsonl"
    write_results(small_records, p)
    back = read_results(p)
    assert [r.to_dict(timing=False) for r in back] == [r.to_dict(timing=False) for r in small_records]
    before = compare_models(small_records, "oc", "pu")
    after = compare_models(back, "oc", "pu")
    assert before == after
    assert before.favored == "pu"


def test_read_results_names_bad_line(tmp_path):
    p = tmp_path / "r.jsonl"
    p.write_text('{"model": "a", "cell": 0, "repeat": 0, "seed": 1, "auc": 0.5}\n{"model": "a"}\n')
    with pytest.raises(ValueError, match=":2:"):
        read_results(p)


def test_csv_projection(tmp_path, small_records):
    p = tmp_path / "r.csv"
    write_results_csv(small_records, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "model,cell,cell_value,repeat,seed,auc,alpha_hat,failed"
    assert len(lines) == 61
    first = small_records[0]
    assert lines[1].split(",")[:4] == [first.model, "0", "0.5", "0"]
    assert float(lines[1].split(",")[5]) == first.auc


def test_compare_detects_consistent_improvement():
    base = [0.61, 0.7, 0.55, 0.8, 0.66, 0.72]
    recs = [_record("a", 0, i, x) for i, x in enumerate(base)]
    recs += [_record("b", 0, i, x + 0.1) for i, x in enumerate(base)]
    c = compare_models(recs, "a", "b")
    assert c.favored == "b" and c.significant
    assert c.p_value == pytest.approx(2 / 64)
    assert c.mean_diff == pytest.approx(0.1)
    swapped = compare_models(recs, "b", "a")
    assert swapped.favored == "b" and swapped.p_value == c.p_value
    assert "favored: b" in c.summary()


def test_compare_five_pairs_is_never_significant():
    recs = [_record("a", 0, i, 0.5) for i in range(5)] + [_record("b", 0, i, 0.9) for i in range(5)]
    c = compare_models(recs, "a", "b")
    assert c.favored is None and c.p_value == pytest.approx(2 / 32)


def test_compare_identical_lists():
    recs = [_record(m, 0, i, 0.5 + i / 100) for m in "ab" for i in range(8)]
    c = compare_models(recs, "a", "b")
    assert c.report is None and c.favored is None
    assert "no significant difference" in c.summary()


def test_compare_pairing_errors():
    recs = [_record("a", 0, i, 0.5) for i in range(6)] + [_record("b", 0, i, 0.6) for i in range(1, 7)]
    with pytest.raises(ValueError, match="same cells"):
        compare_models(recs, "a", "b")
    with pytest.raises(ValueError, match="no records"):
        compare_models(recs, "a", "zzz")
    dup = recs[:6] + recs[:1] + [_record("b", 0, i, 0.6) for i in range(6)]
    with pytest.raises(ValueError, match="duplicate"):
        compare_models(dup, "a", "b")
    failed = recs[:6] + [ResultRecord("b", 0, None, i, 0, None, failed=True) for i in range(6)]
    with pytest.raises(ValueError, match="failed"):
        compare_models(failed, "a", "b")
