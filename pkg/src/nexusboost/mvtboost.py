"""Multivariate tree boosting over coupled responses, relative influence and
covariance-explained attribution."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .boosting import BoostedEnsemble, Stage, _check_training_data
from .cart import TreeParams, _fit, presort
from .errors import EmptyDataError, InsufficientDataError, ShapeError, ValidationError

# Relative slack when deciding that no candidate can lower the discrepancy.
DISCREPANCY_RTOL = 1e-12


@dataclass(frozen=True)
class MvBoostParams:
    n_iterations: int = 1000
    learning_rate: float = 0.05
    tree: TreeParams = field(default_factory=TreeParams)
    response_count: int = 2

    def __post_init__(self):
        if self.n_iterations < 0:
            raise ValidationError("n_iterations must be >= 0")
        if not 0 < self.learning_rate <= 1:
            raise ValidationError("learning_rate must be in (0, 1]")
        if self.response_count < 1:
            raise ValidationError("response_count must be >= 1")


def residual_covariance(R) -> np.ndarray:
    """Sample covariance (ddof=1) of the columns of an n x q residual matrix."""
    return np.atleast_2d(np.cov(np.asarray(R, dtype=float), rowvar=False, ddof=1))


def pair_indices(q: int):
    rows, cols = np.triu_indices(q)
    return [(int(k), int(l)) for k, l in zip(rows, cols)]


def discrepancy_terms(S) -> np.ndarray:
    """Squared covariance entries for every unordered pair k <= l."""
    S = np.atleast_2d(S)
    return S[np.triu_indices(S.shape[0])] ** 2


def discrepancy(S) -> float:
    """Sum over k <= l of cov(r_k, r_l)^2, variances included."""
    return float(discrepancy_terms(S).sum())


def mvboost_fit(X, Y, params: MvBoostParams | None = None) -> BoostedEnsemble:
    """Boost several responses jointly, committing one tree per iteration.

    Each iteration fits one candidate tree per response to that response's
    residuals and commits the candidate whose (learning-rate weighted)
    update lowers the residual covariance discrepancy the most; ties go to
    the lower response index. If no candidate lowers the discrepancy the fit
    stops early, since the state (and therefore every later iteration)
    would be unchanged.
    """
    X, Y = _check_training_data(X, Y)
    if Y.ndim != 2:
        raise ShapeError("Y must be an n x q matrix")
    n, q = Y.shape
    if q == 0:
        raise EmptyDataError("no response columns")
    if n < 2:
        raise InsufficientDataError("multivariate boosting needs at least 2 rows")
    if params is None:
        params = MvBoostParams(response_count=q)
    if params.response_count != q:
        raise ShapeError(f"params.response_count={params.response_count} but Y has {q} columns")

    order = presort(X)
    lr = params.learning_rate
    ys = [np.ascontiguousarray(Y[:, k]) for k in range(q)]
    intercepts = tuple(float(np.mean(y)) for y in ys)
    preds = [np.full(n, c) for c in intercepts]
    current_D = discrepancy(residual_covariance(np.column_stack([y - p for y, p in zip(ys, preds)])))
    cache = {}
    stages = []
    for _ in range(params.n_iterations):
        for k in range(q):
            if k not in cache:
                cache[k] = _fit(X, ys[k] - preds[k], params.tree, order)
        if q == 1:
            best = 0
        else:
            R = np.column_stack([y - p for y, p in zip(ys, preds)])
            trial_D = []
            for k in range(q):
                trial = R.copy()
                trial[:, k] = ys[k] - (preds[k] + lr * cache[k][1])
                trial_D.append(discrepancy(residual_covariance(trial)))
            decreases = [current_D - d for d in trial_D]
            best = int(np.argmax(decreases))
            if decreases[best] < -DISCREPANCY_RTOL * max(current_D, np.finfo(float).tiny):
                break
            current_D = trial_D[best]
        tree, fitted = cache.pop(best)
        preds[best] = preds[best] + lr * fitted
        stages.append(Stage(best, tree, lr))
    return BoostedEnsemble(intercepts, tuple(stages), params, "multivariate")


def _labels(labels, count, prefix):
    labels = tuple(labels) if labels is not None else tuple(f"{prefix}{i}" for i in range(count))
    if len(labels) != count:
        raise ShapeError(f"expected {count} labels, got {len(labels)}")
    return labels


def _write_table(path, corner, row_labels, col_labels, values):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([corner, *col_labels])
        for label, row in zip(row_labels, values):
            writer.writerow([label, *(repr(float(v)) for v in row)])


@dataclass(frozen=True)
class CovarianceExplainedMatrix:
    """Predictors x response-pairs table of explained residual covariance."""

    entries: np.ndarray
    predictor_labels: tuple
    pair_labels: tuple
    pairs: tuple

    def column(self, k: int, l: int) -> np.ndarray:
        return self.entries[:, self.pairs.index((min(k, l), max(k, l)))]

    def reordered(self, row_order, column_order) -> "CovarianceExplainedMatrix":
        return CovarianceExplainedMatrix(
            self.entries[np.ix_(row_order, column_order)],
            tuple(self.predictor_labels[i] for i in row_order),
            tuple(self.pair_labels[j] for j in column_order),
            tuple(self.pairs[j] for j in column_order),
        )

    def to_dict(self) -> dict:
        return {
            "predictors": list(self.predictor_labels),
            "pairs": list(self.pair_labels),
            "entries": [[float(v) for v in row] for row in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self, path) -> None:
        _write_table(path, "predictor", self.predictor_labels, self.pair_labels, self.entries)


def covariance_explained(model: BoostedEnsemble, X, Y, predictor_labels=None,
                         response_labels=None) -> CovarianceExplainedMatrix:
    """Attribute the drop in every squared residual covariance to predictors.

    The stage sequence is replayed on the training data; the change in
    cov(r_k, r_l)^2 caused by each stage is split across predictors in
    proportion to that stage tree's SSE reductions.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or X.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ShapeError(f"X {X.shape} and Y {Y.shape} are not aligned")
    q = model.response_count
    if Y.shape[1] != q:
        raise ShapeError(f"model has {q} responses, Y has {Y.shape[1]} columns")
    if model.stages and X.shape[1] != model.feature_count:
        raise ShapeError(f"model expects {model.feature_count} predictors, got {X.shape[1]}")
    if Y.shape[0] < 2:
        raise InsufficientDataError("need at least 2 rows for a covariance")
    p = X.shape[1]
    pairs = pair_indices(q)
    rlabels = _labels(response_labels, q, "y")
    preds = np.tile(np.asarray(model.intercepts, dtype=float), (X.shape[0], 1))
    before = discrepancy_terms(residual_covariance(Y - preds))
    entries = np.zeros((p, len(pairs)))
    for stage in model.stages:
        preds[:, stage.response_index] += stage.weight * stage.tree.predict(X)
        after = discrepancy_terms(residual_covariance(Y - preds))
        weights = stage.tree.sse_reduction_by_feature
        total = weights.sum()
        if total > 0:
            entries += np.outer(weights / total, before - after)
        before = after
    return CovarianceExplainedMatrix(
        entries,
        _labels(predictor_labels, p, "x"),
        tuple(rlabels[k] if k == l else f"{rlabels[k]}:{rlabels[l]}" for k, l in pairs),
        tuple(pairs),
    )


@dataclass(frozen=True)
class RelativeInfluence:
    """Per-response percentage of SSE reduction credited to each predictor.

    ``percentages`` is q x p; rows of responses with no stages are zero.
    """

    percentages: np.ndarray
    predictor_labels: tuple
    response_labels: tuple

    def fitted_responses(self) -> list:
        return [k for k in range(len(self.response_labels)) if self.percentages[k].sum() > 0]

    def mean(self) -> np.ndarray:
        """Average over the responses that received at least one split."""
        rows = self.fitted_responses()
        if not rows:
            return np.zeros(len(self.predictor_labels))
        return self.percentages[rows].mean(axis=0)

    def ranking(self) -> list:
        """Predictor indices by decreasing mean influence (ties: lower index first)."""
        mean = self.mean()
        return sorted(range(len(mean)), key=lambda j: (-mean[j], j))

    def to_dict(self) -> dict:
        return {
            "predictors": list(self.predictor_labels),
            "responses": {
                r: [float(v) for v in row]
                for r, row in zip(self.response_labels, self.percentages)
            },
            "mean": [float(v) for v in self.mean()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self, path) -> None:
        values = np.column_stack([self.percentages.T, self.mean()])
        _write_table(path, "predictor", self.predictor_labels,
                     (*self.response_labels, "mean"), values)


def relative_influence(model: BoostedEnsemble, feature_count: int | None = None,
                       predictor_labels=None, response_labels=None) -> RelativeInfluence:
    p = model.feature_count
    if p is None:
        if feature_count is None:
            if predictor_labels is None:
                raise ShapeError("model has no stages; pass feature_count")
            feature_count = len(predictor_labels)
        p = feature_count
    q = model.response_count
    totals = np.zeros((q, p))
    for stage in model.stages:
        totals[stage.response_index] += stage.tree.sse_reduction_by_feature
    sums = totals.sum(axis=1, keepdims=True)
    pct = np.divide(100.0 * totals, sums, out=np.zeros_like(totals), where=sums > 0)
    return RelativeInfluence(pct, _labels(predictor_labels, p, "x"), _labels(response_labels, q, "y"))
