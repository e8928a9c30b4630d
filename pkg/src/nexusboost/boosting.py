"""Gradient tree boosting for squared-error loss and the shared ensemble type."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .cart import RegressionTree, TreeParams, _fit, presort
from .errors import EmptyDataError, ShapeError, ValidationError


@dataclass(frozen=True)
class BoostParams:
    n_iterations: int = 1000
    learning_rate: float = 0.05
    tree: TreeParams = field(default_factory=TreeParams)

    def __post_init__(self):
        if self.n_iterations < 0:
            raise ValidationError("n_iterations must be >= 0")
        if not 0 < self.learning_rate <= 1:
            raise ValidationError("learning_rate must be in (0, 1]")


@dataclass(frozen=True)
class Stage:
    response_index: int
    tree: RegressionTree
    weight: float


def _params_to_dict(params) -> dict:
    return dataclasses.asdict(params)


def _params_from_dict(doc: dict):
    from .mvtboost import MvBoostParams

    tree = TreeParams(**doc["tree"])
    rest = {k: v for k, v in doc.items() if k != "tree"}
    if "response_count" in rest:
        return MvBoostParams(tree=tree, **rest)
    return BoostParams(tree=tree, **rest)


@dataclass(frozen=True)
class BoostedEnsemble:
    """Intercepts plus an ordered list of weighted trees.

    The prediction for response k is ``intercepts[k]`` plus the weighted sum
    of the trees of every stage whose ``response_index`` is k. ``kind`` is
    ``"univariate"`` when each response was boosted on its own (iteration i
    of response k is that response's i-th stage) and ``"multivariate"`` when
    one stage was committed per iteration across responses.
    """

    intercepts: tuple
    stages: tuple
    params: object
    kind: str = "univariate"

    @property
    def response_count(self) -> int:
        return len(self.intercepts)

    @property
    def feature_count(self) -> int | None:
        return self.stages[0].tree.feature_count if self.stages else None

    def _check_X(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ShapeError(f"X must be 2-D, got shape {X.shape}")
        if self.stages and X.shape[1] != self.feature_count:
            raise ShapeError(f"model expects {self.feature_count} predictors, got {X.shape[1]}")
        return X

    def predict(self, X) -> np.ndarray:
        X = self._check_X(X)
        out = np.tile(np.asarray(self.intercepts, dtype=float), (X.shape[0], 1))
        for stage in self.stages:
            out[:, stage.response_index] += stage.weight * stage.tree.predict(X)
        return out

    def _iteration_labels(self):
        labels, seen = [], [0] * self.response_count
        for i, stage in enumerate(self.stages):
            seen[stage.response_index] += 1
            labels.append(i + 1 if self.kind == "multivariate" else seen[stage.response_index])
        return labels

    def truncated(self, n_iterations: int) -> "BoostedEnsemble":
        """The ensemble as it stood after ``n_iterations`` boosting iterations."""
        labels = self._iteration_labels()
        stages = tuple(s for s, t in zip(self.stages, labels) if t <= n_iterations)
        params = dataclasses.replace(self.params, n_iterations=n_iterations)
        return dataclasses.replace(self, stages=stages, params=params)

    def staged_predict(self, X, iterations) -> dict:
        """Predictions after each of several iteration counts, in one pass.

        Equal (bit for bit) to ``self.truncated(t).predict(X)`` for each t.
        """
        X = self._check_X(X)
        iterations = sorted(set(int(t) for t in iterations))
        m = X.shape[0]
        by_response = [[] for _ in range(self.response_count)]
        for stage, label in zip(self.stages, self._iteration_labels()):
            by_response[stage.response_index].append((label, stage))
        results = {t: np.empty((m, self.response_count)) for t in iterations}
        for k, staged in enumerate(by_response):
            col = np.full(m, float(self.intercepts[k]))
            pos = 0
            for t in iterations:
                while pos < len(staged) and staged[pos][0] <= t:
                    stage = staged[pos][1]
                    col += stage.weight * stage.tree.predict(X)
                    pos += 1
                results[t][:, k] = col
        return results

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "intercepts": [float(v) for v in self.intercepts],
            "params": _params_to_dict(self.params),
            "stages": [
                {"response_index": s.response_index, "weight": s.weight, "tree": s.tree.to_dict()}
                for s in self.stages
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "BoostedEnsemble":
        stages = tuple(
            Stage(int(s["response_index"]), RegressionTree.from_dict(s["tree"]), float(s["weight"]))
            for s in doc["stages"]
        )
        return cls(tuple(doc["intercepts"]), stages, _params_from_dict(doc["params"]), doc["kind"])

    @classmethod
    def from_json(cls, text: str) -> "BoostedEnsemble":
        return cls.from_dict(json.loads(text))


def _check_training_data(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-D, got shape {X.shape}")
    if y.shape[:1] != X.shape[:1]:
        raise ShapeError(f"X has {X.shape[0]} rows but y has shape {y.shape}")
    if X.shape[0] == 0:
        raise EmptyDataError("cannot boost on zero samples")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValidationError("non-finite values in training data")
    return X, y


def boost_fit(X, y, params: BoostParams = BoostParams()) -> BoostedEnsemble:
    """Fit ``mean(y) + sum_i learning_rate * tree_i(x)``, each tree fitted to
    the residuals left by the previous ones."""
    X, y = _check_training_data(X, y)
    if y.ndim != 1:
        raise ShapeError("boost_fit takes a single response vector")
    order = presort(X)
    intercept = float(np.mean(y))
    pred = np.full(y.shape[0], intercept)
    stages = []
    for _ in range(params.n_iterations):
        tree, fitted = _fit(X, y - pred, params.tree, order)
        pred = pred + params.learning_rate * fitted
        stages.append(Stage(0, tree, params.learning_rate))
    return BoostedEnsemble((intercept,), tuple(stages), params, "univariate")


def boost_fit_columns(X, Y, params: BoostParams = BoostParams()) -> BoostedEnsemble:
    """Independent univariate boosting of every column of ``Y``, packed into one ensemble."""
    X, Y = _check_training_data(X, Y)
    if Y.ndim != 2:
        raise ShapeError("Y must be 2-D")
    intercepts, stages = [], []
    for k in range(Y.shape[1]):
        single = boost_fit(X, Y[:, k], params)
        intercepts.append(single.intercepts[0])
        stages.extend(Stage(k, s.tree, s.weight) for s in single.stages)
    return BoostedEnsemble(tuple(intercepts), tuple(stages), params, "univariate")


def boost_predict(model: BoostedEnsemble, X) -> np.ndarray:
    return model.predict(X)


def staged_training_error(model: BoostedEnsemble, X, y) -> np.ndarray:
    """Training SSE after the intercept and after every stage (length stages + 1).

    For several responses the SSE is summed across them.
    """
    X = model._check_X(X)
    Y = np.asarray(y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape != (X.shape[0], model.response_count):
        raise ShapeError(f"y shape {Y.shape} does not match model/data")
    pred = np.tile(np.asarray(model.intercepts, dtype=float), (X.shape[0], 1))
    out = [float(np.sum((Y - pred) ** 2))]
    for stage in model.stages:
        pred[:, stage.response_index] += stage.weight * stage.tree.predict(X)
        out.append(float(np.sum((Y - pred) ** 2)))
    return np.array(out)
