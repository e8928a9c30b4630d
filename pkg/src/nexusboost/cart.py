"""Least-squares binary regression trees (CART without pruning)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import EmptyDataError, ShapeError, ValidationError


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 3
    min_leaf: int = 5
    min_split_improvement: float = 0.0

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValidationError("max_depth must be >= 0")
        if self.min_leaf < 1:
            raise ValidationError("min_leaf must be >= 1")
        if self.min_split_improvement < 0:
            raise ValidationError("min_split_improvement must be >= 0")


@dataclass(frozen=True)
class Leaf:
    value: float
    n_samples: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


class RegressionTree:
    """A fitted tree; samples go left iff ``x[feature] <= threshold``."""

    def __init__(self, root: TreeNode, params: TreeParams, feature_count: int,
                 sse_reduction_by_feature):
        self.root = root
        self.params = params
        self.feature_count = feature_count
        sse = np.array(sse_reduction_by_feature, dtype=float)
        sse.setflags(write=False)
        self.sse_reduction_by_feature = sse
        self._flat = None

    def __repr__(self):
        return f"RegressionTree(leaves={self.n_leaves}, depth={self.depth})"

    def _flatten(self):
        feature, threshold, left, right, value = [], [], [], [], []

        def visit(node):
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if isinstance(node, Leaf):
                value[i] = node.value
            else:
                feature[i] = node.feature
                threshold[i] = node.threshold
                left[i] = visit(node.left)
                right[i] = visit(node.right)
            return i

        visit(self.root)
        self._flat = (np.array(feature), np.array(threshold), np.array(left),
                      np.array(right), np.array(value))
        return self._flat

    @property
    def depth(self) -> int:
        def d(node):
            return 0 if isinstance(node, Leaf) else 1 + max(d(node.left), d(node.right))
        return d(self.root)

    @property
    def n_leaves(self) -> int:
        def count(node):
            return 1 if isinstance(node, Leaf) else count(node.left) + count(node.right)
        return count(self.root)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise ShapeError(f"expected (m, {self.feature_count}) input, got {X.shape}")
        feature, threshold, left, right, value = self._flat or self._flatten()
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        active = feature[node] >= 0
        while active.any():
            idx = rows[active]
            cur = node[idx]
            go_left = X[idx, feature[cur]] <= threshold[cur]
            node[idx] = np.where(go_left, left[cur], right[cur])
            active = feature[node] >= 0
        return value[node]

    def to_dict(self) -> dict:
        def node_dict(node):
            if isinstance(node, Leaf):
                return {"kind": "leaf", "value": node.value, "n_samples": node.n_samples}
            return {
                "kind": "split",
                "feature": node.feature,
                "threshold": node.threshold,
                "left": node_dict(node.left),
                "right": node_dict(node.right),
            }

        return {
            "feature_count": self.feature_count,
            "params": {
                "max_depth": self.params.max_depth,
                "min_leaf": self.params.min_leaf,
                "min_split_improvement": self.params.min_split_improvement,
            },
            "sse_reduction_by_feature": [float(v) for v in self.sse_reduction_by_feature],
            "root": node_dict(self.root),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RegressionTree":
        def build(d):
            if d["kind"] == "leaf":
                return Leaf(float(d["value"]), int(d["n_samples"]))
            return Split(int(d["feature"]), float(d["threshold"]), build(d["left"]), build(d["right"]))

        return cls(build(doc["root"]), TreeParams(**doc["params"]), int(doc["feature_count"]),
                   doc["sse_reduction_by_feature"])


def presort(X: np.ndarray) -> np.ndarray:
    """Per-feature stable argsort, shape (p, n). Reusable across boosting stages."""
    return np.argsort(X, axis=0, kind="stable").T.copy()


def _best_split(X, y, idx, order_rows, min_leaf):
    """Scan every feature at once; return (gain, feature, position, sorted_rows) or None.

    ``order_rows`` is the node's rows in per-feature sorted order, shape (p, m).
    Gains are computed on node-centred targets with running sums.
    """
    p, m = order_rows.shape
    xs = X[order_rows, np.arange(p)[:, None]]
    yc = y[idx].mean()
    ys = y[order_rows] - yc
    csum = np.cumsum(ys, axis=1)
    total = csum[:, -1:]
    n_left = np.arange(1, m, dtype=float)
    s_left = csum[:, :-1]
    s_right = total - s_left
    gain = s_left ** 2 / n_left + s_right ** 2 / (m - n_left) - total ** 2 / m
    valid = xs[:, 1:] > xs[:, :-1]
    if min_leaf > 1:
        valid[:, : min_leaf - 1] = False
        valid[:, m - min_leaf:] = False
    if not valid.any():
        return None
    gain = np.where(valid, gain, -np.inf)
    # argmax returns the first maximum: lowest feature, then lowest threshold.
    flat = int(np.argmax(gain))
    feature, pos = divmod(flat, m - 1)
    return float(gain[feature, pos]), feature, pos, xs[feature]


def _fit(X, y, params, order=None):
    """Grow a tree; also return its predictions on the training rows."""
    n, p = X.shape
    if order is None:
        order = presort(X)
    sse_by_feature = np.zeros(p)
    train_pred = np.empty(n)

    def leaf(idx):
        value = float(np.mean(y[idx]))
        train_pred[idx] = value
        return Leaf(value, int(idx.size))

    def grow(idx, order_rows, depth):
        m = idx.size
        if depth >= params.max_depth or p == 0 or m < 2 * params.min_leaf:
            return leaf(idx)
        node_y = y[idx]
        if node_y.min() == node_y.max():
            return leaf(idx)
        found = _best_split(X, y, idx, order_rows, params.min_leaf)
        if found is None:
            return leaf(idx)
        gain, feature, pos, xs = found
        if gain <= 0 or gain < params.min_split_improvement:
            return leaf(idx)
        lo, hi = xs[pos], xs[pos + 1]
        threshold = lo + (hi - lo) / 2.0
        if not lo <= threshold < hi:
            threshold = lo
        sse_by_feature[feature] += gain
        goes_left = X[:, feature] <= threshold
        member = np.zeros(n, dtype=bool)
        member[idx] = True
        left_mask = member & goes_left
        right_mask = member & ~goes_left
        left_rows = order_rows[left_mask[order_rows]].reshape(p, -1)
        right_rows = order_rows[right_mask[order_rows]].reshape(p, -1)
        return Split(
            feature,
            float(threshold),
            grow(np.flatnonzero(left_mask), left_rows, depth + 1),
            grow(np.flatnonzero(right_mask), right_rows, depth + 1),
        )

    root = grow(np.arange(n), order, 0)
    return RegressionTree(root, params, p, sse_by_feature), train_pred


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-D, got shape {X.shape}")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ShapeError(f"targets must be a length-{X.shape[0]} vector, got {y.shape}")
    if X.shape[0] == 0:
        raise EmptyDataError("cannot fit a tree on zero samples")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValidationError("non-finite values in tree training data")
    return X, y


def fit_tree(X, targets, params: TreeParams = TreeParams()) -> RegressionTree:
    """Greedy top-down least-squares tree.

    Every feature and every midpoint between consecutive distinct values is
    scored; ties go to the lowest feature index, then the lowest threshold.
    """
    X, y = _check_xy(X, targets)
    return _fit(X, y, params)[0]


def predict_tree(tree: RegressionTree, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (tree.feature_count,):
        raise ShapeError(f"expected a length-{tree.feature_count} vector, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValidationError("non-finite feature value")
    node = tree.root
    while isinstance(node, Split):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.value
