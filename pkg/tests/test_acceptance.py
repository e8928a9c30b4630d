"""Acceptance suite: eleven end-to-end criteria, one PASS/FAIL line each.

Run under pytest (``pytest tests/test_acceptance.py -v -s``) or directly
(``python3 tests/test_acceptance.py``). Each criterion returns
``(passed, detail)``; tolerances and counts are fixed here, not tuned.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
import oracles  # noqa: E402

from nexusboost.boosting import BoostParams, boost_fit, staged_training_error  # noqa: E402
from nexusboost.cart import Leaf, TreeParams, fit_tree  # noqa: E402
from nexusboost.cli import main as cli_main  # noqa: E402
from nexusboost.dataset import PREDICTOR_NAMES, standardize, write_csv  # noqa: E402
from nexusboost.evaluation import (  # noqa: E402
    SIMILAR,
    compare_models,
    cross_validate,
    make_folds,
    multivariate_fitter,
    r_squared,
    rmse,
    select_variables,
    univariate_fitter,
)
from nexusboost.mvtboost import MvBoostParams, covariance_explained, mvboost_fit  # noqa: E402
from nexusboost.seasonal import decompose, deseasonalize, detect_seasonality, periodogram  # noqa: E402
from nexusboost.synthetic import ResponseRecipe, SyntheticSpec, generate  # noqa: E402

SEEDS = range(10)


def c01_cart_oracle():
    t0 = time.perf_counter()
    mismatches = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        n, p = int(rng.integers(2, 31)), int(rng.integers(1, 4))
        X = rng.integers(0, 8, size=(n, p)).astype(float)
        y = rng.normal(size=n)
        tree = fit_tree(X, y, TreeParams(max_depth=1, min_leaf=1))
        if isinstance(tree.root, Leaf):
            got = oracles.sse(y)
        else:
            left = X[:, tree.root.feature] <= tree.root.threshold
            got = oracles.sse(y[left]) + oracles.sse(y[~left])
        mismatches += got != oracles.best_stump_sse(X, y, 1)
    elapsed = time.perf_counter() - t0
    return mismatches == 0 and elapsed < 10, f"{200 - mismatches}/200 exact, {elapsed:.2f}s"


def c02_boosting_oracle():
    stump = TreeParams(max_depth=1, min_leaf=1)
    a = boost_fit([[1], [2]], [0, 2], BoostParams(1, 0.5, stump)).predict([[1], [2]])[:, 0]
    X4, y4 = [[1], [2], [3], [4]], [0, 0, 1, 1]
    b = boost_fit(X4, y4, BoostParams(1, 1.0, stump)).predict(X4)[:, 0]
    hand = np.abs(a - [0.5, 1.5]).max() <= 1e-12 and np.abs(b - y4).max() <= 1e-12
    monotone = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 60))
        X = rng.normal(size=(n, 3))
        y = X[:, 0] ** 2 + rng.normal(size=n)
        params = BoostParams(30, float(rng.uniform(0.01, 1.0)), TreeParams(int(rng.integers(1, 4)), 2))
        err = staged_training_error(boost_fit(X, y, params), X, y)
        monotone += bool(np.all(np.diff(err) <= 0))
    return hand and monotone == 100, f"hand examples {'ok' if hand else 'WRONG'}, {monotone}/100 monotone"


def c03_mv_degeneracy():
    same = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 80))
        X = rng.normal(size=(n, 3))
        y = np.sin(X[:, 0]) + X[:, 1] + rng.normal(size=n)
        tree = TreeParams(int(rng.integers(1, 4)), int(rng.integers(1, 5)))
        lr = float(rng.uniform(0.05, 0.5))
        uni = boost_fit(X, y, BoostParams(40, lr, tree))
        mv = mvboost_fit(X, y[:, None], MvBoostParams(40, lr, tree, 1))
        same += [s.tree.to_dict() for s in mv.stages] == [s.tree.to_dict() for s in uni.stages]
    return same == 50, f"{same}/50 identical"


def c04_covariance_conservation():
    worst = 0.0
    for seed in range(50):
        ds = standardize(generate(SyntheticSpec(seed=seed))[0])
        model = mvboost_fit(ds.X, ds.Y, MvBoostParams(200, 0.05, TreeParams(3, 5), 2))
        sums = covariance_explained(model, ds.X, ds.Y).entries.sum(axis=0)
        expected = oracles.covariance_reduction(ds.Y, model.predict(ds.X))
        worst = max(worst, float(np.max(np.abs(sums - expected) / np.abs(expected))))
    return worst <= 1e-6, f"max relative error {worst:.2e}"


def c05_seasonality_detection():
    t = np.arange(120)
    tone12, tone6 = np.sin(2 * np.pi * t / 12), np.sin(2 * np.pi * t / 6)
    got = {
        "tone12": detect_seasonality(periodogram(tone12)),
        "tone6": detect_seasonality(periodogram(tone6)),
        "noise": detect_seasonality(periodogram(np.random.default_rng(0).standard_normal(120))),
        "deseasonalized12": detect_seasonality(periodogram(deseasonalize(tone12, 12))),
        "deseasonalized6": detect_seasonality(periodogram(deseasonalize(tone6, 6))),
    }
    want = {"tone12": 12, "tone6": 6, "noise": None, "deseasonalized12": None, "deseasonalized6": None}
    return got == want, ", ".join(f"{k}={v}" for k, v in got.items())


def c06_decomposition_fidelity():
    worst_corr, worst_add = 1.0, 0.0
    t = np.arange(120)
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        amplitude = float(rng.uniform(2, 10))
        period = (6, 12)[seed % 2]
        seasonal = amplitude * np.sin(2 * np.pi * t / period + rng.uniform(0, 2 * np.pi))
        trend = 50 + 0.2 * t + 3 * np.sin(2 * np.pi * t / 60)
        x = trend + seasonal + 0.05 * amplitude * rng.standard_normal(120)
        dec = decompose(x, period)
        worst_corr = min(worst_corr, float(np.corrcoef(dec.seasonal, seasonal)[0, 1]))
        worst_add = max(worst_add, float(np.abs(dec.trend + dec.seasonal + dec.remainder - x).max()))
    return worst_corr > 0.99 and worst_add <= 1e-9, f"min corr {worst_corr:.5f}, max additivity error {worst_add:.1e}"


def _deseasonalize_responses(ds):
    Y = ds.Y.copy()
    for k in range(Y.shape[1]):
        Y[:, k] = deseasonalize(Y[:, k], detect_seasonality(periodogram(Y[:, k])))
    return ds.with_responses(Y)


def c07_seasonality_inflation():
    water = ResponseRecipe(100.0, {"max_dry_bulb_temp": 2.0, "enso_index": 2.0},
                           seasonal_amplitude=8.0, seasonal_period=12, noise_sd=2.0)
    params = BoostParams()
    wins, pairs = 0, []
    for seed in SEEDS:
        ds = standardize(generate(SyntheticSpec(seed=seed, water=water))[0])
        plan = make_folds(ds.n, 5, seed)
        with_season = cross_validate(ds, multivariate_fitter(params), plan).r2[0]
        without = cross_validate(_deseasonalize_responses(ds), multivariate_fitter(params), plan).r2[0]
        wins += with_season > without
        pairs.append(f"{with_season:.2f}>{without:.2f}")
    return wins >= 9, f"{wins}/10 seeds (water R2 retained>removed: {' '.join(pairs)})"


def _mv_vs_uni(coupling):
    params = BoostParams()
    wins, mv_rmse, uni_rmse, all_similar = 0, [], [], 0
    for seed in SEEDS:
        ds = standardize(generate(SyntheticSpec(seed=seed, coupling=coupling))[0])
        plan = make_folds(ds.n, 5, seed)
        mv = cross_validate(ds, multivariate_fitter(params), plan, "multivariate")
        uni = cross_validate(ds, univariate_fitter(params), plan, "univariate")
        wins += any(a <= b for a, b in zip(mv.rmse, uni.rmse))
        mv_rmse += mv.rmse
        uni_rmse += uni.rmse
        all_similar += all(v == SIMILAR for v in compare_models(mv, uni).values())
    return wins, float(np.mean(mv_rmse)), float(np.mean(uni_rmse)), all_similar


def c08_nexus_coupling():
    wins, mv, uni, _ = _mv_vs_uni(0.5)
    _, _, _, similar = _mv_vs_uni(0.0)
    coupled = wins >= 8 and mv <= uni
    uncoupled = similar >= 8
    detail = (f"coupling 0.5: mv<=uni for some response in {wins}/10, mean RMSE mv {mv:.4f} vs uni {uni:.4f} "
              f"[{'ok' if coupled else 'FAIL'}]; coupling 0: similar for both responses in {similar}/10 "
              f"[{'ok' if uncoupled else 'FAIL'}]")
    return coupled and uncoupled, detail


def c09_variable_selection():
    active = ("max_dry_bulb_temp", "avg_relative_humidity", "enso_index")
    idx = {PREDICTOR_NAMES.index(a) for a in active}
    water = ResponseRecipe(100.0, dict(zip(active, (4.0, -3.0, 3.0))), noise_sd=2.0)
    electricity = ResponseRecipe(50.0, dict(zip(active, (2.0, 2.0, -1.5))), noise_sd=1.5)
    top3, top5 = 0, 0
    for seed in SEEDS:
        ds = standardize(generate(SyntheticSpec(seed=seed, water=water, electricity=electricity))[0])
        sel = select_variables(ds, BoostParams(), top_m=5)
        top3 += set(sel.ranking[:3]) == idx
        top5 += idx <= set(sel.selected)
    return top3 >= 9 and top5 == 10, f"top-3 exact in {top3}/10, top-5 contains all in {top5}/10"


def c10_metrics_and_folds():
    worst = 0.0
    rng = np.random.default_rng(0)
    for _ in range(1000):
        m = int(rng.integers(2, 40))
        pred, obs = rng.normal(size=m) * 10, rng.normal(size=m) * 10
        worst = max(worst, abs(rmse(pred, obs) - oracles.rmse(pred, obs)),
                    abs(r_squared(pred, obs) - oracles.r_squared(pred, obs)))
    skew_ok = 0
    for trial in range(1000):
        n = int(rng.integers(2, 400))
        k = int(rng.integers(2, min(n, 12) + 1))
        plan = make_folds(n, k, seed=trial, blocked=bool(trial % 2))
        tests = [plan.test_indices(f) for f in range(k)]
        sizes = [t.size for t in tests]
        partition = sorted(np.concatenate(tests).tolist()) == list(range(n))
        skew_ok += partition and max(sizes) - min(sizes) <= 1
    return worst <= 1e-12 and skew_ok == 1000, f"max metric deviation {worst:.1e}, {skew_ok}/1000 plans partition with skew<=1"


def c11_determinism(tmp):
    tmp = Path(tmp)
    datasets = [generate(SyntheticSpec(n_months=96, seed=s, city_id=f"city{s}"))[0] for s in (1, 2)]
    write_csv(datasets, tmp / "input.csv")
    (tmp / "run.cfg").write_text(
        "input = input.csv\nmode = both\nseed = 7\ngrid.n_iterations = 50, 150\n"
        "grid.learning_rate = 0.05, 0.1\ngrid.max_depth = 2, 3\n"
    )
    codes = [cli_main(["run-all", "--config", str(tmp / "run.cfg"), "--out", str(tmp / name)])
             for name in ("first", "second")]
    compared, differing = 0, []
    for path in sorted((tmp / "first").rglob("*")):
        if path.suffix == ".csv" or path.name.startswith("model_"):
            compared += 1
            rel = path.relative_to(tmp / "first")
            if path.read_bytes() != (tmp / "second" / rel).read_bytes():
                differing.append(str(rel))
    ok = codes == [0, 0] and compared > 0 and not differing
    return ok, f"exit codes {codes}, {compared - len(differing)}/{compared} CSV and model files byte-identical"


CRITERIA = [
    ("1 CART oracle equivalence", c01_cart_oracle),
    ("2 boosting hand oracle", c02_boosting_oracle),
    ("3 multivariate degeneracy", c03_mv_degeneracy),
    ("4 covariance conservation", c04_covariance_conservation),
    ("5 seasonality detection", c05_seasonality_detection),
    ("6 decomposition fidelity", c06_decomposition_fidelity),
    ("7 seasonality-inflation direction", c07_seasonality_inflation),
    ("8 nexus-coupling direction", c08_nexus_coupling),
    ("9 variable selection recovery", c09_variable_selection),
    ("10 metrics exactness", c10_metrics_and_folds),
    ("11 end-to-end determinism", c11_determinism),
]


def _line(name, ok, detail):
    return f"[{'PASS' if ok else 'FAIL'}] criterion {name}: {detail}"


@pytest.mark.parametrize("name, check", CRITERIA, ids=[c[0].split()[0] for c in CRITERIA])
def test_criterion(name, check, tmp_path, capsys):
    ok, detail = check(tmp_path) if check is c11_determinism else check()
    with capsys.disabled():
        print("\n" + _line(name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    import tempfile

    failures = 0
    for name, check in CRITERIA:
        if check is c11_determinism:
            with tempfile.TemporaryDirectory() as tmp:
                ok, detail = check(tmp)
        else:
            ok, detail = check()
        failures += not ok
        print(_line(name, ok, detail), flush=True)
    sys.exit(1 if failures else 0)
