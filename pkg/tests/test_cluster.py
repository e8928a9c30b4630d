import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.cluster.hierarchy import linkage as scipy_linkage
from scipy.spatial.distance import pdist

import oracles
from nexusboost.cluster import cluster_order, hier_cluster
from nexusboost.errors import ConfigurationError
from nexusboost.svg import heatmap_svg, shade


def test_single_row():
    d = hier_cluster([[1.0, 2.0]])
    assert d.merges == () and d.leaf_order == (0,)


def test_identical_pair_merges_first():
    d = hier_cluster([[0.0, 5.0], [3.0, 3.0], [0.0, 5.0]])
    assert d.merges[0] == (0, 2, 0.0)


def test_hand_computed_complete_linkage():
    d = hier_cluster([[0.0], [1.0], [10.0]], linkage="complete")
    assert d.merges == ((0, 1, 1.0), (2, 3, 10.0))


def test_unknown_linkage():
    with pytest.raises(ConfigurationError):
        hier_cluster([[0.0], [1.0]], linkage="ward")


def test_cluster_order_examples():
    assert cluster_order(np.array([[4.0]])) == ([0], [0])
    m = np.array([[1.0, 0.0], [9.0, 9.0], [1.0, 0.0], [8.0, 9.5]])
    rows, _ = cluster_order(m)
    assert abs(rows.index(0) - rows.index(2)) == 1


def test_block_matrix_groups_contiguous():
    rng = np.random.default_rng(0)
    m = np.zeros((6, 4))
    m[[0, 2, 4]][:, :2] = 0
    m[np.ix_([0, 2, 4], [0, 1])] = 10 + rng.uniform(size=(3, 2))
    m[np.ix_([1, 3, 5], [2, 3])] = 10 + rng.uniform(size=(3, 2))
    rows, cols = cluster_order(m)
    assert set(rows[:3]) in ({0, 2, 4}, {1, 3, 5})
    assert set(cols[:2]) in ({0, 1}, {2, 3})


rows_strategy = st.integers(2, 8).flatmap(
    lambda m: arrays(np.float64, (m, 3), elements=st.floats(-20, 20, allow_nan=False)))


@settings(max_examples=60, deadline=None)
@given(rows_strategy, st.sampled_from(["average", "complete"]))
def test_properties(rows, how):
    d = hier_cluster(rows, linkage=how)
    heights = [h for _, _, h in d.merges]
    assert all(b >= a - 1e-9 for a, b in zip(heights, heights[1:]))
    assert sorted(d.leaf_order) == list(range(len(rows)))
    # heights agree with scipy's implementation of the same linkage
    np.testing.assert_allclose(heights, scipy_linkage(pdist(rows), method=how)[:, 2], rtol=1e-9, atol=1e-9)
    # every merge height is the linkage distance between the merged clusters
    members = {i: [i] for i in range(len(rows))}
    for step, (a, b, h) in enumerate(d.merges):
        assert h == pytest.approx(oracles.linkage_distance(rows, members[a], members[b], how), rel=1e-9, abs=1e-9)
        members[len(rows) + step] = members.pop(a) + members.pop(b)


int_rows = st.integers(2, 8).flatmap(
    lambda m: arrays(np.float64, (m, 3), elements=st.integers(-20, 20).map(float)))


@settings(max_examples=60, deadline=None)
@given(int_rows, st.sampled_from(["average", "complete"]), st.integers(-50, 50))
def test_constant_shift_keeps_merges(rows, how, shift):
    # integer data keeps the shift exact in floating point
    d = hier_cluster(rows, linkage=how)
    shifted = hier_cluster(rows + shift, linkage=how)
    assert [m[:2] for m in shifted.merges] == [m[:2] for m in d.merges]


def test_shade_darkens_monotonically():
    def luminance(color):
        r, g, b = (int(color[i:i + 2], 16) for i in (1, 3, 5))
        return 0.2126 * r + 0.7152 * g + 0.0722 * b
    lum = [luminance(shade(f)) for f in np.linspace(0, 1, 21)]
    assert all(b < a for a, b in zip(lum, lum[1:]))


def test_heatmap_cells_darker_for_larger_values():
    values = np.array([[0.0, 3.0], [1.0, 2.0]])
    svg = heatmap_svg(values, ["a", "b"], ["p", "q"], "t")
    cells = re.findall(r'fill="(#[0-9a-f]{6})" stroke="white" data-value="([^"]+)"', svg)
    assert len(cells) == 4
    ordered = sorted(cells, key=lambda c: float(c[1]))
    assert [c[0] for c in ordered] == sorted((c[0] for c in cells), reverse=True)
