import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncdp.geometry import make_etf
from ncdp.synth import (LabeledDataset, ShiftModel, adversarial_shift,
                        adversarial_shift_multiclass, class_counts_from_weights,
                        imbalanced_gradient_offset, imbalanced_weights, load_features,
                        perturb_test_point, sample_dataset, save_features)
from ncdp.trainer import LinearHead, zero_init_direction


@pytest.fixture
def binary():
    return make_etf(3, 2, canonical=True)


def test_perfect_rows_in_label_order(binary):
    d = sample_dataset(binary, 4, (0.5, 0.5), ShiftModel(), seed=1)
    e1 = np.array([1.0, 0, 0])
    np.testing.assert_array_equal(d.features, [e1, e1, -e1, -e1])
    np.testing.assert_array_equal(d.labels, [0, 0, 1, 1])


def test_imbalanced_counts_and_alpha(binary):
    d = sample_dataset(binary, 10, (0.3, 0.7), seed=0)
    np.testing.assert_array_equal(d.class_counts, [3, 7])
    assert d.alpha == pytest.approx(0.3)


def test_largest_remainder_ties_go_low():
    np.testing.assert_array_equal(class_counts_from_weights(10, [1 / 3] * 3), [4, 3, 3])
    np.testing.assert_array_equal(class_counts_from_weights(7, [0.5, 0.5]), [4, 3])


@given(st.integers(1, 500), st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8))
def test_counts_sum_to_n(n, raw):
    w = np.asarray(raw) / np.sum(raw)
    c = class_counts_from_weights(n, w / w.sum())
    assert c.sum() == n
    assert np.all(np.abs(c - n * w) < 1 + 1e-9)


def test_weights_must_sum_to_one(binary):
    with pytest.raises(ValueError, match="sum"):
        sample_dataset(binary, 10, (0.3, 0.6))


def test_imbalanced_weights():
    np.testing.assert_allclose(imbalanced_weights(2, 0.3), [0.3, 0.7])
    w = imbalanced_weights(10, 0.3)
    assert w[:5].sum() == pytest.approx(0.3)
    assert w.sum() == pytest.approx(1.0)


def test_stochastic_shift_bound_and_mean():
    f = make_etf(50, 2, canonical=True)
    beta, n = 0.1, 1000
    d = sample_dataset(f, n, shift=ShiftModel.stochastic(beta), seed=3)
    V = d.features - f.M.T[d.labels]
    assert np.abs(V).max() <= beta
    assert np.all(np.abs(V.mean(axis=0)) <= 3 * beta / np.sqrt(3 * n))


def test_orthogonal_stochastic_shift_has_no_prototype_component():
    f = make_etf(20, 2, canonical=True)
    d = sample_dataset(f, 50, shift=ShiftModel.stochastic(0.2, orthogonal_to_prototype=True),
                       seed=0)
    V = d.features - f.M.T[d.labels]
    assert np.all(V[:, 0] == 0.0)
    assert np.abs(V).max() <= 0.2


def test_generation_is_deterministic():
    f = make_etf(12, 3, seed=5)
    s = ShiftModel.stochastic(0.1)
    a = sample_dataset(f, 30, shift=s, seed=42)
    b = sample_dataset(f, 30, shift=s, seed=42)
    np.testing.assert_array_equal(a.features, b.features)
    assert not np.array_equal(a.features, sample_dataset(f, 30, shift=s, seed=43).features)


def test_shift_symmetry_over_many_draws():
    f = make_etf(8, 2, canonical=True)
    n = 100_000
    d = sample_dataset(f, n, shift=ShiftModel.stochastic(0.3), seed=11)
    V = d.features - f.M.T[d.labels]
    se = V.std(axis=0, ddof=1) / np.sqrt(n)
    assert np.all(np.abs(V.mean(axis=0)) <= 5 * se)


def test_binary_offset_is_label_signed(binary):
    v = np.array([0.0, 0.1, -0.1])
    d = sample_dataset(binary, 4, shift=ShiftModel.offset(0.1, v), seed=0)
    np.testing.assert_allclose(d.features[0], binary.M[:, 0] + v)
    np.testing.assert_allclose(d.features[-1], binary.M[:, 1] - v)


def test_multiclass_offset_is_common():
    f = make_etf(6, 3, canonical=True)
    v = np.full(6, 0.05)
    d = sample_dataset(f, 6, shift=ShiftModel.offset(0.05, v))
    np.testing.assert_allclose(d.features - f.M.T[d.labels], np.tile(v, (6, 1)))


def test_offset_vector_violating_bound():
    with pytest.raises(ValueError, match="l_inf"):
        ShiftModel.offset(0.1, np.array([0.2, 0.0]))


def test_adversarial_kind_rejected_for_training(binary):
    with pytest.raises(ValueError, match="test"):
        sample_dataset(binary, 4, shift=ShiftModel.adversarial(0.1))


def test_adversarial_example():
    theta = np.array([1.0, -2.0])
    v = adversarial_shift(theta, +1, 0.1)
    np.testing.assert_allclose(v, [-0.1, 0.1])
    x = np.array([0.3, 0.2])
    assert theta @ x - theta @ (x + v) == pytest.approx(0.3)


def test_perturb_test_point_paths():
    x = np.array([1.0, 0.0, 0.0])
    np.testing.assert_array_equal(perturb_test_point(x, 0, ShiftModel()), x)
    out = perturb_test_point(x, 0, ShiftModel.stochastic(0.05), seed=2)
    assert np.abs(out - x).max() <= 0.05
    head = LinearHead(np.array([1.0, -2.0, 0.5]), reparameterized=True)
    adv = perturb_test_point(x, 1, ShiftModel.adversarial(0.1), model=head)
    np.testing.assert_allclose(adv - x, [0.1, -0.1, 0.1])
    with pytest.raises(ValueError, match="model"):
        perturb_test_point(x, 0, ShiftModel.adversarial(0.1))


@given(st.integers(1, 12), st.integers(0, 2**32 - 1), st.floats(0.01, 1.0),
       st.sampled_from([1, -1]))
def test_adversarial_beats_every_vertex(p, seed, beta, y):
    rng = np.random.default_rng(seed)
    theta, x = rng.standard_normal(p), rng.standard_normal(p)
    best = y * theta @ (x + adversarial_shift(theta, y, beta))
    signs = np.array(list(itertools.product([-1.0, 1.0], repeat=p)))
    brute = (y * (x + beta * signs) @ theta).min()
    assert best <= brute + 1e-12


@given(st.integers(1, 8), st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_multiclass_attack_matches_enumeration(p, K, seed):
    rng = np.random.default_rng(seed)
    W, x = rng.standard_normal((K, p)), rng.standard_normal(p)
    y, beta = int(rng.integers(K)), 0.3

    def worst_margin(v):
        s = W @ (x + v)
        return s[y] - np.delete(s, y).max()

    got = worst_margin(adversarial_shift_multiclass(W, x, y, beta))
    signs = np.array(list(itertools.product([-1.0, 1.0], repeat=p)))
    assert got <= min(worst_margin(beta * s) for s in signs) + 1e-12


def test_imbalanced_gradient_offset_examples():
    v = np.full(4, 0.1)
    np.testing.assert_allclose(imbalanced_gradient_offset(0.5, v, 10), [5, 0, 0, 0])
    np.testing.assert_allclose(imbalanced_gradient_offset(0.3, np.full(3, 0.1), 100),
                               [52, 2, 2])
    np.testing.assert_allclose(imbalanced_gradient_offset(1 - 1e-12, v, 10),
                               [5 - 0.5, -0.5, -0.5, -0.5], atol=1e-9)
    with pytest.raises(ValueError):
        imbalanced_gradient_offset(1.0, v, 10)


def test_imbalanced_gradient_offset_matches_real_gradient():
    f = make_etf(5, 2, canonical=True)
    v = np.array([0.0, 0.1, -0.1, 0.1, 0.1])
    n, alpha = 100, 0.3
    d = sample_dataset(f, n, (1 - alpha, alpha),
                       ShiftModel.offset(0.1, v, offset_mode="common"))
    step = zero_init_direction(d.class_sums(), loss="logistic", reparameterized=True)
    np.testing.assert_allclose(step, imbalanced_gradient_offset(alpha, v, n))


def test_load_minimal(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("label,f0,f1\n0,1,0\n1,-1,0\n")
    d = load_features(path)
    assert (d.n, d.p, d.num_classes) == (2, 2, 2)
    assert d.sensitivity == 1.0


def test_load_rejects_nan_with_line(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("label,f0,f1\n0,1,0\n1,nan,0\n")
    with pytest.raises(ValueError, match=":3:"):
        load_features(path)


@pytest.mark.parametrize("body,msg", [
    ("label,f0,f1\n0,1,0\n2,-1,0\n", "contiguous from 0"),
    ("label,f0,f1\n0,1\n", "expected 3 fields"),
    ("label,f0,f1\n0.5,1,0\n", "non-integer label"),
    ("", "empty"),
    ("label,f0\n", "no data rows"),
])
def test_load_errors(tmp_path, body, msg):
    path = tmp_path / "f.csv"
    path.write_text(body)
    with pytest.raises(ValueError, match=msg):
        load_features(path)


def test_load_normalize_and_clip(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("label,f0,f1\n0,3,4\n1,0,-0.5\n")
    d = load_features(path, normalize=True)
    np.testing.assert_allclose(np.linalg.norm(d.features, axis=1), 1.0)
    c = load_features(path, clip=2.0)
    np.testing.assert_allclose(c.features[0], [1.2, 1.6])
    np.testing.assert_allclose(c.features[1], [0.0, -0.5])
    assert c.sensitivity == 2.0


def test_save_load_roundtrip(tmp_path):
    d = sample_dataset(make_etf(6, 3, seed=1), 9, shift=ShiftModel.stochastic(0.1), seed=2)
    save_features(d, tmp_path / "d.csv")
    back = load_features(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.features, d.features)
    np.testing.assert_array_equal(back.labels, d.labels)


def test_dataset_validation():
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, 3)), np.array([0, 2]), 2)
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((0, 3)), np.array([], dtype=int), 2)
