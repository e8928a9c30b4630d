"""Agglomerative hierarchical clustering for ordering heat-map axes."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EmptyDataError, ValidationError

LINKAGES = ("average", "complete")


@dataclass(frozen=True)
class Dendrogram:
    """Merges as ``(cluster_a, cluster_b, height)``; singletons are 0..m-1 and
    the cluster created by merge i gets id ``m + i`` (scipy's convention)."""

    merges: tuple
    leaf_order: tuple
    size: int

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "merges": [[a, b, h] for a, b, h in self.merges],
            "leaf_order": list(self.leaf_order),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _pairwise_euclidean(rows):
    diff = rows[:, None, :] - rows[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def hier_cluster(rows, metric: str = "euclidean", linkage: str = "average") -> Dendrogram:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    if metric != "euclidean":
        raise ConfigurationError(f"unsupported metric {metric!r}")
    if linkage not in LINKAGES:
        raise ConfigurationError(f"unsupported linkage {linkage!r}; choose from {LINKAGES}")
    m = rows.shape[0]
    if m == 0:
        raise EmptyDataError("nothing to cluster")
    if not np.isfinite(rows).all():
        raise ValidationError("non-finite values in clustering input")
    dist = _pairwise_euclidean(rows)
    reduce = np.mean if linkage == "average" else np.max
    members = {i: [i] for i in range(m)}
    children = {}
    merges = []
    for step in range(m - 1):
        active = sorted(members)
        best = None
        for ia, a in enumerate(active):
            for b in active[ia + 1 :]:
                d = float(reduce(dist[np.ix_(members[a], members[b])]))
                # strict < keeps the lowest (a, b) pair on ties
                if best is None or d < best[0]:
                    best = (d, a, b)
        height, a, b = best
        new = m + step
        members[new] = members.pop(a) + members.pop(b)
        children[new] = (a, b)
        merges.append((a, b, height))

    def leaves(node):
        if node < m:
            return [node]
        left, right = children[node]
        return leaves(left) + leaves(right)

    order = leaves(2 * m - 2) if m > 1 else [0]
    return Dendrogram(tuple(merges), tuple(order), m)


def cluster_order(matrix, linkage: str = "average") -> tuple:
    """Leaf orders for the rows (predictors) and columns (response pairs).

    Rows are clustered on their profiles across pairs, columns on their
    profiles across predictors. Accepts a CovarianceExplainedMatrix or a
    plain 2-D array.
    """
    entries = np.asarray(getattr(matrix, "entries", matrix), dtype=float)
    if entries.ndim != 2:
        raise ValidationError("expected a 2-D matrix")
    rows = hier_cluster(entries, linkage=linkage).leaf_order
    cols = hier_cluster(entries.T, linkage=linkage).leaf_order
    return list(rows), list(cols)
