"""Cross-validation, out-of-sample metrics, hyperparameter tuning, variable
selection and paired model comparison."""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .boosting import BoostParams, boost_fit_columns
from .cart import TreeParams
from .dataset import NexusDataset
from .errors import (
    ComparabilityError,
    ConfigurationError,
    EmptyDataError,
    InsufficientDataError,
    ShapeError,
    ValidationError,
)
from .mvtboost import MvBoostParams, mvboost_fit, relative_influence

SIMILAR, A_BETTER, B_BETTER = "similar", "a_better", "b_better"


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple
    seed: int
    blocked: bool = False

    @property
    def n(self) -> int:
        return len(self.assignments)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) != fold)

    def fingerprint(self) -> str:
        text = json.dumps([self.k, self.seed, self.blocked, list(self.assignments)])
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def make_folds(n: int, k: int = 5, seed: int = 0, blocked: bool = False) -> FoldPlan:
    """Shuffle with a seeded RNG, then cut into k contiguous blocks.

    The first ``n % k`` folds get one extra row. ``blocked=True`` skips the
    shuffle so each fold is a contiguous stretch of time.
    """
    if k < 2:
        raise ConfigurationError(f"need at least 2 folds, got {k}")
    if n < k:
        raise ConfigurationError(f"cannot split {n} rows into {k} folds")
    order = np.arange(n) if blocked else np.random.default_rng(seed).permutation(n)
    sizes = [n // k + (1 if f < n % k else 0) for f in range(k)]
    assignments = np.empty(n, dtype=int)
    start = 0
    for f, size in enumerate(sizes):
        assignments[order[start : start + size]] = f
        start += size
    return FoldPlan(k, tuple(int(a) for a in assignments), int(seed), blocked)


def _pair(pred, obs):
    pred = np.asarray(pred, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if pred.shape != obs.shape or pred.ndim != 1:
        raise ShapeError(f"pred {pred.shape} and obs {obs.shape} must be equal-length vectors")
    if pred.size == 0:
        raise EmptyDataError("empty vectors")
    return pred, obs


def rmse(pred, obs) -> float:
    pred, obs = _pair(pred, obs)
    return float(np.sqrt(np.sum((pred - obs) ** 2) / pred.size))


def r_squared(pred, obs) -> float:
    pred, obs = _pair(pred, obs)
    if pred.size < 2:
        raise InsufficientDataError("R^2 needs at least 2 observations")
    total = np.sum((obs - obs.mean()) ** 2)
    if total == 0:
        raise ValidationError("observations have zero variance; R^2 undefined")
    return float(1.0 - np.sum((obs - pred) ** 2) / total)


@dataclass
class ScoreReport:
    """Out-of-fold scores for one (city, model variant).

    Headline ``r2``/``rmse`` come from the pooled out-of-fold predictions;
    per-fold values (k x q) are kept for paired comparisons. A fold R^2 is
    NaN when its held-out responses have no variance.
    """

    city: str
    variant: str
    response_names: tuple
    r2: tuple
    rmse: tuple
    fold_r2: np.ndarray
    fold_rmse: np.ndarray
    plan_fingerprint: str
    oof_predictions: np.ndarray = field(repr=False, default=None)
    details: dict = field(default_factory=dict)

    def metric(self, response: str, name: str) -> float:
        return getattr(self, name)[self.response_names.index(response)]

    def to_dict(self) -> dict:
        return {
            "city": self.city,
            "variant": self.variant,
            "responses": {
                name: {
                    "r2": self.r2[k],
                    "rmse": self.rmse[k],
                    "fold_r2": [float(v) for v in self.fold_r2[:, k]],
                    "fold_rmse": [float(v) for v in self.fold_rmse[:, k]],
                }
                for k, name in enumerate(self.response_names)
            },
            "plan": self.plan_fingerprint,
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=True)


def intercept_fitter():
    """Fitter predicting the training mean of every response."""

    class _Mean:
        def __init__(self, means):
            self.means = means

        def predict(self, X):
            return np.tile(self.means, (np.asarray(X).shape[0], 1))

    return lambda X, Y: _Mean(np.asarray(Y, dtype=float).mean(axis=0))


def multivariate_fitter(params: BoostParams):
    def fit(X, Y):
        mv = MvBoostParams(params.n_iterations, params.learning_rate, params.tree, Y.shape[1])
        return mvboost_fit(X, Y, mv)
    return fit


def univariate_fitter(params: BoostParams):
    return lambda X, Y: boost_fit_columns(X, Y, params)


def _as_arrays(data):
    if isinstance(data, NexusDataset):
        return data.X, data.Y, data.city_id, data.response_names
    X, Y = data
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    return np.asarray(X, dtype=float), Y, "", tuple(f"y{k}" for k in range(Y.shape[1]))


def score_predictions(oof, Y, plan: FoldPlan, city="", variant="", response_names=None,
                      details=None) -> ScoreReport:
    q = Y.shape[1]
    names = tuple(response_names or (f"y{k}" for k in range(q)))
    fold_r2 = np.full((plan.k, q), np.nan)
    fold_rmse = np.empty((plan.k, q))
    for f in range(plan.k):
        test = plan.test_indices(f)
        for k in range(q):
            fold_rmse[f, k] = rmse(oof[test, k], Y[test, k])
            obs = Y[test, k]
            if test.size >= 2 and np.ptp(obs) > 0:
                fold_r2[f, k] = r_squared(oof[test, k], obs)
    return ScoreReport(
        city=city,
        variant=variant,
        response_names=names,
        r2=tuple(r_squared(oof[:, k], Y[:, k]) for k in range(q)),
        rmse=tuple(rmse(oof[:, k], Y[:, k]) for k in range(q)),
        fold_r2=fold_r2,
        fold_rmse=fold_rmse,
        plan_fingerprint=plan.fingerprint(),
        oof_predictions=oof,
        details=dict(details or {}),
    )


def cross_validate(data, fitter, plan: FoldPlan, variant: str = "model",
                   details=None) -> ScoreReport:
    """Fit on k-1 folds, predict the held-out fold, score pooled predictions.

    ``data`` is a NexusDataset or an ``(X, Y)`` pair; ``fitter(X, Y)`` must
    return an object with ``predict(X) -> (m, q)``.
    """
    X, Y, city, names = _as_arrays(data)
    if plan.n != X.shape[0]:
        raise ShapeError(f"fold plan covers {plan.n} rows, data has {X.shape[0]}")
    oof = np.empty_like(Y)
    for f in range(plan.k):
        train, test = plan.train_indices(f), plan.test_indices(f)
        if train.size < 2:
            raise InsufficientDataError(f"fold {f} leaves {train.size} training rows")
        model = fitter(X[train], Y[train])
        oof[test] = model.predict(X[test])
    return score_predictions(oof, Y, plan, city, variant, names, details)


@dataclass(frozen=True)
class TuningGrid:
    n_iterations: tuple = (200, 500, 1000)
    learning_rate: tuple = (0.01, 0.05, 0.1)
    max_depth: tuple = (2, 3, 4)
    min_leaf: int = 5

    def __post_init__(self):
        for name in ("n_iterations", "learning_rate", "max_depth"):
            if not getattr(self, name):
                raise ConfigurationError(f"tuning grid {name} is empty")


@dataclass
class TuningResult:
    best: BoostParams
    table: list  # (n_iterations, learning_rate, max_depth, summed pooled RMSE)


def tune(data, plan: FoldPlan, grid: TuningGrid = TuningGrid(), kind: str = "multivariate") -> TuningResult:
    """Pick boosting hyperparameters by pooled out-of-fold RMSE summed over responses.

    One fit per (fold, learning_rate, max_depth) at the largest iteration
    count; smaller counts are read off the same fit, since a boosting run
    with fewer iterations is exactly a prefix of a longer one. Ties keep the
    earliest grid point (learning_rate, then max_depth, then n_iterations).
    """
    X, Y, _, _ = _as_arrays(data)
    if kind not in ("multivariate", "univariate"):
        raise ConfigurationError(f"unknown model kind {kind!r}")
    make = multivariate_fitter if kind == "multivariate" else univariate_fitter
    n_max = max(grid.n_iterations)
    iterations = sorted(set(grid.n_iterations))
    table = []
    best_key = None
    for lr, depth in itertools.product(grid.learning_rate, grid.max_depth):
        tree = TreeParams(max_depth=depth, min_leaf=grid.min_leaf)
        fitter = make(BoostParams(n_max, lr, tree))
        oof = {t: np.empty_like(Y) for t in iterations}
        for f in range(plan.k):
            train, test = plan.train_indices(f), plan.test_indices(f)
            if train.size < 2:
                raise InsufficientDataError(f"fold {f} leaves {train.size} training rows")
            staged = fitter(X[train], Y[train]).staged_predict(X[test], iterations)
            for t in iterations:
                oof[t][test] = staged[t]
        for t in grid.n_iterations:
            score = sum(rmse(oof[t][:, k], Y[:, k]) for k in range(Y.shape[1]))
            table.append((t, lr, depth, score))
            if best_key is None or score < best_key[0]:
                best_key = (score, BoostParams(t, lr, tree))
    return TuningResult(best_key[1], table)


@dataclass
class Selection:
    selected: tuple  # predictor indices in decreasing influence order
    ranking: tuple
    mean_influence: np.ndarray
    influence: object


def select_variables(data, params: BoostParams, top_m: int | None = 5,
                     threshold: float | None = None, predictor_labels=None,
                     response_labels=None) -> Selection:
    """Rank predictors by relative influence averaged across responses.

    Keeps the ``top_m`` best, or, when ``threshold`` is given, every predictor
    whose mean influence (percent) is at least the threshold.
    """
    X, Y, _, names = _as_arrays(data)
    if isinstance(data, NexusDataset):
        predictor_labels = predictor_labels or data.predictor_names
    p = X.shape[1]
    if threshold is None and (top_m is None or top_m < 1 or top_m > p):
        raise ConfigurationError(f"top_m must be in [1, {p}], got {top_m}")
    model = multivariate_fitter(params)(X, Y)
    influence = relative_influence(model, p, predictor_labels, response_labels or names)
    ranking = tuple(influence.ranking())
    mean = influence.mean()
    if threshold is not None:
        selected = tuple(j for j in ranking if mean[j] >= threshold)
    else:
        selected = ranking[:top_m]
    return Selection(selected, ranking, mean, influence)


def paired_verdict(a, b, alpha: float = 0.05) -> str:
    """Two-sided paired t-test on per-fold errors; lower error is better."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    mean = d.mean()
    sd = d.std(ddof=1) if d.size > 1 else 0.0
    if sd == 0:
        if mean == 0:
            return SIMILAR
        return A_BETTER if mean < 0 else B_BETTER
    t = mean / (sd / np.sqrt(d.size))
    critical = stats.t.ppf(1 - alpha / 2, d.size - 1)
    if abs(t) < critical:
        return SIMILAR
    return A_BETTER if mean < 0 else B_BETTER


def compare_models(report_a: ScoreReport, report_b: ScoreReport, alpha: float = 0.05) -> dict:
    """Per-response verdict: ``similar``, ``a_better`` or ``b_better``."""
    if report_a.plan_fingerprint != report_b.plan_fingerprint:
        raise ComparabilityError("reports were built on different fold plans")
    if report_a.response_names != report_b.response_names:
        raise ComparabilityError("reports cover different responses")
    if not 0 < alpha < 1:
        raise ConfigurationError("alpha must be in (0, 1)")
    return {
        name: paired_verdict(report_a.fold_rmse[:, k], report_b.fold_rmse[:, k], alpha)
        for k, name in enumerate(report_a.response_names)
    }
