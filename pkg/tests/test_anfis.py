import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cycletime.anfis import (DegenerateFiring, FisModel, GaussianMF, BadRange, evaluate_fis,
                             fit_consequents, gaussian_mf, grid_partition, normalized_firing,
                             partition_trace, predict_fis, run_anfis_comparison, train_hybrid)
from cycletime.dataset import Dataset, SplitDataset

BOX = [(-1.0, 1.0)] * 3


def brute_force_output(fis, x):
    """Sugeno weighted average computed rule by rule from the MF objects."""
    num = den = 0.0
    for rule in fis.rules:
        w = 1.0
        for i, j in enumerate(rule.antecedent):
            w *= fis.mfs[i][j](x[i])
        cons = rule.consequent
        f = cons[0] if fis.order == "constant" else float(np.dot(cons[:-1], x) + cons[-1])
        num += w * f
        den += w
    return num / den


def random_fis(rng, n_inputs=3, n_mfs=2, order="linear"):
    fis = grid_partition([(-1.0, 1.0)] * n_inputs, n_mfs, order)
    jitter = [c + rng.uniform(-0.1, 0.1, c.size) for c in fis.centers]
    sig = [s * rng.uniform(0.8, 1.2, s.size) for s in fis.sigmas]
    cons = rng.normal(size=fis.consequents.shape)
    return fis.with_params(centers=jitter, sigmas=sig, consequents=cons)


def split_of(X, y, n_train, n_val):
    d = Dataset(X, y)
    idx = np.arange(len(d))
    return SplitDataset(d.take(idx[:n_train]), d.take(idx[n_train:n_train + n_val]),
                        d.take(idx[n_train + n_val:]))


# -- membership functions --------------------------------------------------------

def test_gaussian_at_center_and_one_sigma():
    mf = GaussianMF(0.3, 0.2)
    assert mf(0.3) == 1.0
    assert mf(0.5) == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert mf(0.5) == pytest.approx(0.60653066, abs=1e-8)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 3))
def test_gaussian_is_symmetric_and_bounded(c, d, sigma):
    mf = GaussianMF(c, sigma)
    assert gaussian_mf(c + d, mf) == pytest.approx(gaussian_mf(c - d, mf), rel=1e-12, abs=1e-300)
    assert 0.0 <= mf(c + d) <= 1.0


def test_sigma_must_be_positive():
    with pytest.raises(ValueError):
        GaussianMF(0.0, 0.0)


# -- grid partition --------------------------------------------------------------

@pytest.mark.parametrize("n_mfs,expected", [(2, 8), (4, 64)])
def test_rule_count_is_full_grid(n_mfs, expected):
    fis = grid_partition(BOX, n_mfs)
    assert fis.n_rules == expected
    assert fis.consequents.shape == (expected, 4)
    brute = list(itertools.product(range(n_mfs), repeat=3))
    assert [tuple(a) for a in fis.antecedents] == brute


def test_grid_partition_centres_and_crossings():
    fis = grid_partition([(20.0, 80.0), (500.0, 1500.0), (300.0, 900.0)], 4)
    np.testing.assert_allclose(fis.centers[0], [20, 40, 60, 80])
    for c, mfs in zip(fis.centers, fis.mfs):
        for a, b in zip(mfs[:-1], mfs[1:]):
            mid = 0.5 * (a.c + b.c)
            assert a(mid) == pytest.approx(0.5, abs=1e-12)
            assert b(mid) == pytest.approx(0.5, abs=1e-12)


def test_grid_partition_rejects_bad_ranges():
    with pytest.raises(BadRange):
        grid_partition([(1.0, 1.0)], 2)
    with pytest.raises(BadRange):
        grid_partition([(0.0, 1.0)], 1)


# -- inference -------------------------------------------------------------------

def test_constant_consequents_give_constant_output():
    fis = grid_partition(BOX, 2, "constant").with_params(consequents=np.full((8, 1), 5.0))
    X = np.random.default_rng(0).uniform(-1, 1, (20, 3))
    np.testing.assert_allclose(predict_fis(fis, X, normalized=True), 5.0, rtol=1e-14)


def test_dominant_rule_sets_output():
    # one rule whose MFs sit on the query point while every other MF is far away
    fis = grid_partition(BOX, 2, "constant")
    centers = [np.array([0.0, 50.0]) for _ in range(3)]
    sigmas = [np.array([0.5, 0.5]) for _ in range(3)]
    cons = np.arange(8, dtype=float).reshape(8, 1) + 10.0
    fis = fis.with_params(centers=centers, sigmas=sigmas, consequents=cons)
    assert evaluate_fis(fis, [0.0, 0.0, 0.0], normalized=True) == pytest.approx(10.0, abs=1e-12)


@pytest.mark.parametrize("order", ["constant", "linear"])
@pytest.mark.parametrize("n_mfs", [2, 3])
def test_vectorised_inference_matches_rule_by_rule(order, n_mfs):
    rng = np.random.default_rng(n_mfs)
    for _ in range(5):
        fis = random_fis(rng, n_mfs=n_mfs, order=order)
        X = rng.uniform(-1.2, 1.2, (15, 3))
        got = predict_fis(fis, X, normalized=True)
        want = [brute_force_output(fis, x) for x in X]
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_firing_is_a_convex_weighting():
    rng = np.random.default_rng(1)
    fis = random_fis(rng, n_mfs=3)
    X = rng.uniform(-3, 3, (50, 3))
    w = normalized_firing(fis, X)
    assert np.all(w >= 0)
    np.testing.assert_allclose(w.sum(axis=1), 1.0, rtol=1e-14)


def test_far_inputs_still_get_finite_predictions():
    fis = random_fis(np.random.default_rng(2))
    out = predict_fis(fis, np.array([[60.0, -60.0, 60.0]]), normalized=True)
    assert np.all(np.isfinite(out))


def test_nan_input_is_degenerate():
    fis = random_fis(np.random.default_rng(3))
    with pytest.raises(DegenerateFiring):
        predict_fis(fis, np.array([[np.nan, 0.0, 0.0]]), normalized=True)


def test_linear_output_lies_within_rule_outputs():
    rng = np.random.default_rng(4)
    fis = random_fis(rng)
    X = rng.uniform(-1, 1, (30, 3))
    f = X @ fis.consequents[:, :-1].T + fis.consequents[:, -1]
    out = predict_fis(fis, X, normalized=True)
    assert np.all(out >= f.min(axis=1) - 1e-12) and np.all(out <= f.max(axis=1) + 1e-12)


def test_constant_order_is_linear_order_with_zero_slopes():
    rng = np.random.default_rng(5)
    const = random_fis(rng, order="constant")
    lin_cons = np.hstack([np.zeros((8, 3)), const.consequents])
    lin = FisModel(const.centers, const.sigmas, lin_cons, "linear")
    X = rng.uniform(-1, 1, (25, 3))
    np.testing.assert_allclose(predict_fis(lin, X, True), predict_fis(const, X, True), rtol=1e-14)


def test_fis_serialisation_round_trip():
    fis = random_fis(np.random.default_rng(6), n_mfs=4)
    d = json.loads(json.dumps(fis.to_dict()))
    assert d["model_kind"] == "anfis"
    back = FisModel.from_dict(d)
    X = np.random.default_rng(7).uniform(-1, 1, (10, 3))
    np.testing.assert_array_equal(predict_fis(back, X), predict_fis(fis, X))
    assert len(d["rules"]) == 64


# -- training --------------------------------------------------------------------

def test_lse_recovers_known_linear_consequents():
    rng = np.random.default_rng(8)
    truth = random_fis(rng)
    X = rng.uniform(-1, 1, (200, 3))
    y = predict_fis(truth, X, normalized=True)
    start = truth.with_params(consequents=np.zeros_like(truth.consequents))
    fitted, res = fit_consequents(start, X, y)
    assert not res.rank_deficient
    np.testing.assert_allclose(fitted.consequents, truth.consequents, atol=1e-8)
    r = y - predict_fis(fitted, X, normalized=True)
    assert np.mean(r * r) < 1e-10


def test_linear_lse_never_worse_than_constant():
    rng = np.random.default_rng(9)
    X = rng.uniform(-1, 1, (100, 3))
    y = np.sin(2 * X[:, 0]) + X[:, 1] * X[:, 2]
    errs = {}
    for order in ("constant", "linear"):
        fis, _ = fit_consequents(grid_partition(BOX, 2, order), X, y)
        errs[order] = np.mean((y - predict_fis(fis, X, True)) ** 2)
    assert errs["linear"] <= errs["constant"] + 1e-12


def test_zero_premise_step_leaves_premise_unchanged():
    rng = np.random.default_rng(10)
    X = rng.uniform(-1, 1, (90, 3))
    y = np.tanh(X.sum(axis=1))
    fis0 = grid_partition(BOX, 2)
    fis, rep = train_hybrid(fis0, split_of(X, y, 60, 15), epochs=5, lr_premise=0.0)
    for a, b in zip(fis.centers, fis0.centers):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(fis.sigmas, fis0.sigmas):
        np.testing.assert_array_equal(a, b)


def test_premise_gradient_matches_finite_differences():
    from cycletime.anfis import _mse, _premise_gradient
    rng = np.random.default_rng(11)
    X = rng.uniform(-1, 1, (40, 2))
    y = np.sin(3 * X[:, 0]) * X[:, 1]
    fis = random_fis(rng, n_inputs=2, n_mfs=3)
    d_c, d_s = _premise_gradient(fis, X, y)
    h = 1e-6
    for i in range(2):
        for j in range(3):
            for which, grad in (("centers", d_c), ("sigmas", d_s)):
                plus = [np.array(a) for a in getattr(fis, which)]
                minus = [np.array(a) for a in getattr(fis, which)]
                plus[i][j] += h
                minus[i][j] -= h
                fd = (_mse(fis.with_params(**{which: plus}), X, y)
                      - _mse(fis.with_params(**{which: minus}), X, y)) / (2 * h)
                assert grad[i][j] == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_training_mse_falls_in_early_epochs(synthetic600):
    falling = 0
    for seed in range(1, 11):
        [rep] = run_anfis_comparison(synthetic600, n_mfs_list=(2,), orders=("linear",),
                                     seed=seed, epochs=5)
        tr = np.array(rep.loss_trace)
        falling += bool(np.all(np.diff(tr) <= 0))
    assert falling >= 9


def test_comparison_has_four_cells(synthetic600):
    reps = run_anfis_comparison(synthetic600, seed=3, epochs=3)
    assert [r.algorithm for r in reps] == ["anfis-2mf-constant", "anfis-2mf-linear",
                                           "anfis-4mf-constant", "anfis-4mf-linear"]
    assert [r.details["n_rules"] for r in reps] == [8, 8, 64, 64]
    trace = partition_trace(reps[0])
    assert len(trace) == 100
    assert trace[0][0] == 0
