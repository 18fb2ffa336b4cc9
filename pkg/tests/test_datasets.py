import dataclasses

import numpy as np
import pytest

from puoc.datasets import (
    CsvFormatError,
    Mode,
    PuDataset,
    PuView,
    ScenarioSpec,
    fig1_spec,
    fig3_spec,
    gen_multimodal_scenario,
    gen_two_gaussian_scenario,
    generate,
    load_csv_dataset,
    load_csv_test,
    mirrored_shift,
    named_scenario,
    scar_sample,
    write_csv_dataset,
    write_csv_test,
)


def _pools(n_pos=3000, n_neg=3000, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n_pos, 2)), rng.normal(5, 1, size=(n_neg, 2))


def test_alpha_one_gives_only_positives():
    pos, neg = _pools()
    d = scar_sample(pos, neg, 100, 500, 1.0, seed=1)
    assert d.latent_labels.sum() == 500
    assert d.alpha_true == 1.0


def test_positive_fraction_concentrates():
    pos, neg = _pools(8000, 8000)
    d = scar_sample(pos, neg, 100, 5000, 0.5, seed=2)
    assert abs(d.latent_labels.mean() - 0.5) <= 0.02


def test_scar_frequency_over_seeds():
    pos, neg = _pools(1500, 1500)
    fracs = [scar_sample(pos, neg, 200, 1000, 0.7, seed=s).latent_labels.mean() for s in range(200)]
    assert abs(np.mean(fracs) - 0.7) <= 0.01


def test_latent_labels_match_pool_membership():
    pos, neg = _pools()
    d = scar_sample(pos, neg, 50, 300, 0.4, seed=3)
    pos_rows = {tuple(r) for r in pos}
    from_pos = np.array([tuple(r) in pos_rows for r in d.unlabeled])
    assert np.array_equal(from_pos, d.latent_labels == 1)
    # labeled and unlabeled positives never share a pool row
    assert not ({tuple(r) for r in d.positive} & {tuple(r) for r in d.unlabeled})


def test_scar_determinism_and_pool_errors():
    pos, neg = _pools()
    a = scar_sample(pos, neg, 50, 300, 0.4, seed=9)
    b = scar_sample(pos, neg, 50, 300, 0.4, seed=9)
    assert np.array_equal(a.unlabeled, b.unlabeled) and np.array_equal(a.positive, b.positive)
    with pytest.raises(ValueError):
        scar_sample(pos[:10], neg, 50, 300, 0.4, seed=0)
    with pytest.raises(ValueError):
        scar_sample(pos, neg[:10], 50, 300, 0.4, seed=0)
    with pytest.raises(ValueError):
        scar_sample(pos, neg, 50, 300, 0.0, seed=0)


def test_generator_determinism():
    a, ap, an = generate(fig1_spec(seed=5))
    b, bp, bn = generate(fig1_spec(seed=5))
    for x, y in [(a.positive, b.positive), (a.unlabeled, b.unlabeled), (ap, bp), (an, bn)]:
        assert x.tobytes() == y.tobytes()
    c, _, _ = generate(fig1_spec(seed=6))
    assert not np.array_equal(a.unlabeled, c.unlabeled)


def test_shift_only_moves_test_negatives():
    train, tp, tn = generate(fig1_spec(seed=4))
    s_train, s_tp, s_tn = generate(fig1_spec(shift=True, seed=4))
    assert np.array_equal(train.unlabeled, s_train.unlabeled)
    assert np.array_equal(tp, s_tp)
    assert tn[:, 0].mean() > 3 and s_tn[:, 0].mean() < -3


def test_zero_shift_override_is_identity():
    spec = fig1_spec(seed=2)
    same = spec.with_(test_negative_modes=spec.negative_modes)
    _, _, tn = generate(spec)
    _, _, tn2 = generate(same)
    assert np.array_equal(tn, tn2)


def test_mirrored_shift_matches_canonical_shift():
    assert mirrored_shift(fig1_spec()) == fig1_spec(shift=True)


def test_fig3_geometry():
    train, tp, tn = gen_multimodal_scenario(fig3_spec(seed=1))
    corners = np.sign(tp)
    assert {tuple(c) for c in corners} == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
    assert np.abs(tn.mean(axis=0)).max() < 0.2
    assert train.positive.shape == (1000, 2) and train.unlabeled.shape == (2000, 2)


def test_single_mode_multimodal_matches_two_gaussian():
    spec = fig1_spec(seed=3)
    a_train, a_tp, a_tn = gen_two_gaussian_scenario(spec)
    b_train, b_tp, b_tn = gen_multimodal_scenario(spec)
    assert np.array_equal(a_train.unlabeled, b_train.unlabeled)
    assert np.array_equal(a_tp, b_tp) and np.array_equal(a_tn, b_tn)
    with pytest.raises(ValueError):
        gen_two_gaussian_scenario(fig3_spec())


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec((Mode((0, 0), (1, 1), 0.5),), (Mode((1, 1), (1, 1)),))
    with pytest.raises(ValueError):
        ScenarioSpec((Mode((0, 0), (1, 0)),), (Mode((1, 1), (1, 1)),))
    with pytest.raises(ValueError):
        ScenarioSpec((Mode((0, 0), (1, 1)),), (Mode((1, 1, 1), (1, 1, 1)),))
    with pytest.raises(ValueError):
        fig1_spec(alpha=1.5)
    with pytest.raises(ValueError):
        named_scenario("nope")


def test_trainer_view_hides_latent_fields():
    fields = {f.name for f in dataclasses.fields(PuView)}
    assert fields == {"positive", "unlabeled"}
    train, _, _ = generate(fig1_spec(seed=0))
    view = train.trainer_view()
    assert not hasattr(view, "latent_labels") and not hasattr(view, "alpha_true")
    X, s = view.to_Xs()
    assert X.shape == (3000, 2) and s.sum() == 1000


def test_dataset_validation():
    with pytest.raises(ValueError):
        PuDataset(np.zeros((2, 2)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        PuDataset(np.zeros((2, 2)), np.zeros((3, 2)), latent_labels=[1, 0])
    with pytest.raises(ValueError):
        PuDataset(np.array([[np.nan, 0.0]]), np.zeros((3, 2)))


def test_csv_round_trip(tmp_path):
    train, tp, tn = generate(fig1_spec(seed=8, n_pos_labeled=50, n_unlabeled=80, n_test_per_class=30))
    write_csv_dataset(train, tmp_path / "train.csv")
    write_csv_test(tp, tn, tmp_path / "test.csv")
    back = load_csv_dataset(tmp_path / "train.csv")
    assert np.array_equal(back.positive, train.positive)
    assert np.array_equal(back.unlabeled, train.unlabeled)
    assert np.array_equal(back.latent_labels, train.latent_labels)
    X, y = load_csv_test(tmp_path / "test.csv")
    assert np.array_equal(X, np.vstack([tp, tn]))
    assert y.sum() == 30 and len(y) == 60


def test_csv_small_file(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("f0,f1,s\n1,2,p\n3,4,u\n5,6,u\n")
    d = load_csv_dataset(p)
    assert (len(d.positive), len(d.unlabeled)) == (1, 2)
    assert d.latent_labels is None


def test_csv_latent_column_hidden_from_view(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("f0,s,y_latent\n1,p,\n3,u,1\n5,u,0\n")
    d = load_csv_dataset(p)
    assert list(d.latent_labels) == [1, 0]
    assert not hasattr(d.trainer_view(), "latent_labels")


@pytest.mark.parametrize(
    "body, fragment",
    [
        ("f0,s\n1,p\ninf,u\n", ":3:"),
        ("f0,s\n1,p\n2,x\n", "unknown role"),
        ("f0,s\n1,p\n2,u,7\n", "expected 2 columns"),
        ("f0,s\n1,p\nabc,u\n", ":3:"),
        ("f0,s\n1,p\n", "need both"),
        ("", "empty"),
        ("a,s\n1,p\n", "no feature"),
    ],
)
def test_csv_errors_name_the_line(tmp_path, body, fragment):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(CsvFormatError, match=fragment):
        load_csv_dataset(p)


def test_csv_test_file_errors(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("f0,y\n1,1\n2,2\n")
    with pytest.raises(CsvFormatError, match=":3:"):
        load_csv_test(p)
