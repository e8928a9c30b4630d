import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from nexusboost.boosting import BoostParams
from nexusboost.cart import TreeParams
from nexusboost.errors import ComparabilityError
from nexusboost.evaluation import (
    A_BETTER,
    B_BETTER,
    SIMILAR,
    TuningGrid,
    compare_models,
    cross_validate,
    intercept_fitter,
    make_folds,
    multivariate_fitter,
    paired_verdict,
    r_squared,
    rmse,
    score_predictions,
    select_variables,
    tune,
)
from nexusboost.synthetic import SyntheticSpec, generate


def test_folds_even_split():
    plan = make_folds(10, 5, seed=0)
    tests = [sorted(plan.test_indices(f)) for f in range(5)]
    assert all(len(t) == 2 for t in tests)
    assert sorted(i for t in tests for i in t) == list(range(10))


def test_folds_remainder_goes_first():
    plan = make_folds(11, 5, seed=0)
    assert [plan.test_indices(f).size for f in range(5)] == [3, 2, 2, 2, 2]


def test_folds_deterministic():
    a, b = make_folds(50, 5, seed=9), make_folds(50, 5, seed=9)
    assert np.array_equal(a.assignments, b.assignments)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != make_folds(50, 5, seed=10).fingerprint()


def test_blocked_folds_are_contiguous():
    plan = make_folds(23, 4, blocked=True)
    for f in range(4):
        idx = plan.test_indices(f)
        assert np.array_equal(idx, np.arange(idx[0], idx[-1] + 1))


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 300), st.integers(2, 10), st.integers(0, 2**32 - 1), st.booleans())
def test_folds_partition(n, k, seed, blocked):
    k = min(k, n)
    plan = make_folds(n, k, seed, blocked)
    sizes = [plan.test_indices(f).size for f in range(k)]
    assert max(sizes) - min(sizes) <= 1
    assert sorted(np.concatenate([plan.test_indices(f) for f in range(k)]).tolist()) == list(range(n))
    for f in range(k):
        assert set(plan.train_indices(f)).isdisjoint(plan.test_indices(f))


def test_metric_examples():
    assert rmse([1, 2], [1, 2]) == 0.0
    assert rmse([0, 0], [3, 4]) == pytest.approx(3.5355339059327378, rel=1e-15)
    assert r_squared([1, 2, 3], [1, 2, 3]) == 1.0
    assert r_squared([2, 2, 2], [1, 2, 3]) == 0.0
    assert r_squared([2, 2], [0, 2]) == -1.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-1e3, 1e3))
def test_metrics_match_oracle(seed, shift):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 50))
    pred, obs = rng.normal(size=m), rng.normal(size=m)
    assert rmse(pred, obs) == pytest.approx(oracles.rmse(pred, obs), rel=1e-12)
    assert r_squared(pred, obs) == pytest.approx(oracles.r_squared(pred, obs), rel=1e-12, abs=1e-12)
    assert rmse(pred + shift, obs + shift) == pytest.approx(rmse(pred, obs), rel=1e-9, abs=1e-9)


def test_intercept_model_cannot_beat_mean(rng):
    Y = rng.normal(size=(40, 2))
    report = cross_validate((np.zeros((40, 1)), Y), intercept_fitter(), make_folds(40, 5))
    assert all(r <= 0 for r in report.r2)


def test_memorizer_on_noise_is_useless():
    rng = np.random.default_rng(21)
    X, Y = rng.normal(size=(60, 2)), rng.normal(size=(60, 1))

    class Nearest:
        def __init__(self, X, Y):
            self.X, self.Y = X, Y

        def predict(self, Z):
            d = ((Z[:, None, :] - self.X[None]) ** 2).sum(-1)
            return self.Y[d.argmin(axis=1)]

    report = cross_validate((X, Y), Nearest, make_folds(60, 5))
    assert report.r2[0] < 0.1


def test_cross_validate_deterministic():
    ds, _ = generate(SyntheticSpec(n_months=60, seed=3))
    fit = multivariate_fitter(BoostParams(20, 0.1, TreeParams(2, 3)))
    plan = make_folds(ds.n, 5, seed=1)
    assert cross_validate(ds, fit, plan).to_json() == cross_validate(ds, fit, plan).to_json()


def test_tuning_prefix_equals_direct_fit():
    ds, _ = generate(SyntheticSpec(n_months=60, seed=4))
    plan = make_folds(ds.n, 3, seed=0)
    grid = TuningGrid((5, 15), (0.1,), (2,), min_leaf=3)
    result = tune(ds, plan, grid)
    for t, lr, depth, score in result.table:
        direct = cross_validate(ds, multivariate_fitter(BoostParams(t, lr, TreeParams(depth, 3))), plan)
        assert score == sum(direct.rmse)
    assert result.best.n_iterations in (5, 15)


def _report(fold_rmse, plan=None):
    plan = plan or make_folds(10, 5)
    rep = score_predictions(np.zeros((10, 1)), np.arange(10.0)[:, None], plan)
    object.__setattr__(rep, "fold_rmse", np.asarray(fold_rmse, dtype=float)[:, None])
    return rep


def test_compare_identical_is_similar():
    a = _report([1, 2, 3, 4, 5])
    assert compare_models(a, a) == {"y0": SIMILAR}


def test_compare_strict_dominance():
    assert compare_models(_report([1] * 5), _report([2] * 5)) == {"y0": A_BETTER}
    assert paired_verdict([2] * 5, [1] * 5) == B_BETTER


def test_compare_tiny_noise_similar():
    rng = np.random.default_rng(8)
    b = rng.uniform(1, 2, size=5)
    assert paired_verdict(b + 1e-6 * rng.standard_normal(5), b) == SIMILAR


def test_compare_needs_same_plan():
    with pytest.raises(ComparabilityError):
        compare_models(_report([1] * 5), _report([1] * 5, make_folds(10, 5, seed=3)))


def test_selection_prefers_dominant_predictor():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(100, 4))
    Y = np.column_stack([5 * X[:, 2], 5 * X[:, 2]]) + 0.1 * rng.normal(size=(100, 2))
    sel = select_variables((X, Y), BoostParams(30, 0.1, TreeParams(2, 5)), top_m=2)
    assert sel.selected[0] == 2
    assert len(sel.selected) == 2


def test_selection_threshold_rule():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(100, 4))
    Y = np.column_stack([5 * X[:, 2], X[:, 0]]) + 0.1 * rng.normal(size=(100, 2))
    sel = select_variables((X, Y), BoostParams(30, 0.1, TreeParams(2, 5)), threshold=10.0)
    assert set(sel.selected) == {j for j in range(4) if sel.mean_influence[j] >= 10.0}
