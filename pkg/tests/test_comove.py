import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import pdist, squareform

from kinex.comove import (
    CorrelationMatrix,
    DistanceMatrix,
    UnionFind,
    classical_mds,
    correlation_matrix,
    distance_matrix,
    mst,
    pearson,
)
from kinex.errors import DegenerateSeriesError, InsufficientDataError
from kinex.panel import CleaningPolicy, IndicatorKind, TimeSeriesPanel

from oracles import SpanningTreeEnumerator, pearson_fraction, pearson_moments


def _labels(n):
    return tuple(chr(65 + k) * 3 for k in range(n))


def _panel(codes, grid):
    return TimeSeriesPanel(IndicatorKind.GINI, tuple(codes), tuple(range(2000, 2000 + len(grid[0]))), grid)


# pearson

def test_pearson_self_and_anti():
    assert pearson([1, 2, 3], [1, 2, 3]) == 1.0
    assert pearson([1, 2, 3], [3, 2, 1]) == -1.0


def test_pearson_hand_value():
    # rho^2 = 169/196 in exact arithmetic, so rho = 13/14
    assert pearson_fraction([1, 2, 4], [1, 3, 4]) == Fraction(169, 196)
    assert pearson([1, 2, 4], [1, 3, 4]) == pytest.approx(13 / 14, abs=1e-15)


def test_pearson_errors():
    with pytest.raises(DegenerateSeriesError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(InsufficientDataError):
        pearson([1, 2], [2, 1])
    with pytest.raises(ValueError):
        pearson([1, 2, 3], [1, 2])


series = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=30)


@given(series, st.data(), st.floats(0.01, 100), st.floats(-1e3, 1e3))
def test_pearson_affine_invariance(x, data, a, b):
    y = data.draw(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=len(x), max_size=len(x)))
    x, y = np.array(x), np.array(y)
    assume(np.std(x) > 1e-3 * (1 + np.abs(x).max()) and np.std(y) > 1e-3 * (1 + np.abs(y).max()))
    r = pearson(x, y)
    assert -1.0 <= r <= 1.0
    assert pearson(a * x + b, y) == pytest.approx(r, abs=1e-9)
    assert pearson(-x, y) == pytest.approx(-r, abs=1e-12)
    assert r == pytest.approx(pearson_moments(x, y), abs=1e-7)


# correlation matrix

def test_identical_series_give_all_ones():
    row = [1.0, 3.0, 2.0, 5.0, 4.0, 6.0, 8.0, 7.0]
    c = correlation_matrix(_panel(["AAA", "BBB", "CCC"], [row, row, row]), CleaningPolicy())
    assert np.allclose(c.entries, 1.0, atol=1e-15)
    assert c.dropped == {}


def test_constant_country_dropped_with_warning():
    rng = np.random.default_rng(1)
    grid = rng.normal(size=(3, 10)).tolist() + [[2.0] * 10]
    with pytest.warns(UserWarning, match="DDD"):
        c = correlation_matrix(_panel(["AAA", "BBB", "CCC", "DDD"], grid), CleaningPolicy())
    assert c.labels == ("AAA", "BBB", "CCC")
    assert c.dropped == {"DDD": "constant series"}


def test_matrix_matches_per_pair_pearson():
    rng = np.random.default_rng(7)
    grid = rng.normal(size=(4, 12))
    grid[0, 3] = grid[2, 5] = grid[3, 0] = np.nan
    panel = _panel(["AAA", "BBB", "CCC", "DDD"], grid)
    c = correlation_matrix(panel, CleaningPolicy())
    for i in range(4):
        for j in range(4):
            u, v = grid[i], grid[j]
            m = ~(np.isnan(u) | np.isnan(v))
            expected = 1.0 if i == j else pearson_moments(u[m], v[m])
            assert c.entries[i, j] == pytest.approx(expected, abs=1e-12)
    assert np.array_equal(c.entries, c.entries.T)
    assert np.all(np.diag(c.entries) == 1.0)


def test_unpairable_country_is_dropped():
    rng = np.random.default_rng(3)
    grid = rng.normal(size=(4, 12))
    grid[3, :8] = np.nan  # only 4 observed years: cannot reach an overlap of 8
    with pytest.warns(UserWarning):
        c = correlation_matrix(_panel(["AAA", "BBB", "CCC", "DDD"], grid), CleaningPolicy())
    assert c.labels == ("AAA", "BBB", "CCC")
    assert "DDD" in c.dropped and "no valid pairing" in c.dropped["DDD"]


def test_too_few_countries():
    rng = np.random.default_rng(3)
    with pytest.raises(InsufficientDataError):
        correlation_matrix(_panel(["AAA"], rng.normal(size=(1, 10))), CleaningPolicy())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(InsufficientDataError):
            correlation_matrix(_panel(["AAA", "BBB"], rng.normal(size=(2, 5))), CleaningPolicy())


# distance matrix

def _corr(entries):
    entries = np.asarray(entries, dtype=float)
    return CorrelationMatrix(_labels(len(entries)), entries)


def test_distance_substitutions():
    d = distance_matrix(_corr([[1, 1, -1, 0], [1, 1, 0, 0], [-1, 0, 1, 0], [0, 0, 0, 1]]))
    assert d.entries[0, 1] == 0.0
    assert d.entries[0, 2] == 2.0
    assert d.entries[0, 3] == pytest.approx(math.sqrt(2), abs=1e-15)
    assert np.all(np.diag(d.entries) == 0.0)


@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_distance_properties(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 12))
    c = np.corrcoef(x)
    c = np.clip(0.5 * (c + c.T), -1, 1)
    np.fill_diagonal(c, 1.0)
    d = distance_matrix(_corr(c)).entries
    assert np.array_equal(d, d.T)
    assert np.all(np.diag(d) == 0)
    assert d.min() >= 0 and d.max() <= 2
    iu = np.triu_indices(n, 1)
    rho, zeta = c[iu], d[iu]
    for a in range(len(rho)):
        for b in range(len(rho)):
            if rho[a] > rho[b]:
                assert zeta[a] <= zeta[b]


# MDS

def _dist(points):
    D = squareform(pdist(np.asarray(points, dtype=float)))
    return DistanceMatrix(_labels(len(D)), D)


def test_mds_two_points():
    e = classical_mds(DistanceMatrix(("AAA", "BBB"), np.array([[0.0, 1.0], [1.0, 0.0]])), 1)
    assert sorted(e.coords[:, 0]) == pytest.approx([-0.5, 0.5], abs=1e-12)
    assert e.coords[np.argmax(np.abs(e.coords[:, 0])), 0] > 0


def test_mds_equilateral_triangle():
    D = np.ones((3, 3)) - np.eye(3)
    e = classical_mds(DistanceMatrix(("AAA", "BBB", "CCC"), D), 2)
    assert np.allclose(squareform(pdist(e.coords)), D, atol=1e-9)
    assert e.eigenvalues[0] >= e.eigenvalues[1]


@pytest.mark.parametrize("seed", range(10))
def test_mds_round_trip_planar(seed):
    pts = np.random.default_rng(seed).uniform(-5, 5, size=(8, 2))
    d = _dist(pts)
    e = classical_mds(d, 2)
    assert np.abs(squareform(pdist(e.coords)) - d.entries).max() < 1e-6
    assert e.coords.shape == (8, 2) and len(e.eigenvalues) == 2
    for k in range(2):
        assert e.coords[np.argmax(np.abs(e.coords[:, k])), k] > 0


def test_mds_reports_negative_eigenvalues():
    # violates the triangle inequality, so it cannot be Euclidean
    D = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
    with pytest.warns(UserWarning, match="non-Euclidean"):
        e = classical_mds(DistanceMatrix(("AAA", "BBB", "CCC"), D), 2)
    assert e.eigenvalues[1] < 0
    assert np.all(e.coords[:, 1] == 0)


def test_mds_argument_checks():
    D = DistanceMatrix(("AAA",), np.zeros((1, 1)))
    with pytest.raises(InsufficientDataError):
        classical_mds(D, 1)
    with pytest.raises(ValueError):
        classical_mds(_dist([[0, 0], [1, 0], [0, 1]]), 3)


# MST

def _named(D):
    return DistanceMatrix(_labels(len(D)), np.asarray(D, dtype=float))


def test_mst_unique_minimum():
    D = np.array([[0, 1, 2], [1, 0, 3], [2, 3, 0]], dtype=float)
    assert mst(_named(D)).edges == ((0, 1, 1.0), (0, 2, 2.0))


def test_mst_tie_break():
    D = np.ones((4, 4)) - np.eye(4)
    assert [(i, j) for i, j, _ in mst(_named(D)).edges] == [(0, 1), (0, 2), (0, 3)]


def test_prufer_count():
    assert len(SpanningTreeEnumerator(4).trees) == 16
    assert len(SpanningTreeEnumerator(5).trees) == 125


@pytest.fixture(scope="module")
def enum6():
    return SpanningTreeEnumerator(6)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mst_minimal_and_spanning(enum6, seed):
    rng = np.random.default_rng(seed)
    W = rng.uniform(0, 2, size=(6, 6))
    D = np.triu(W, 1) + np.triu(W, 1).T
    tree = mst(_named(D))
    assert len(tree.edges) == 5
    uf = UnionFind(6)
    for i, j, w in tree.edges:
        assert i < j and w == D[i, j]
        assert uf.union(i, j)
    assert uf.components == 1
    assert tree.total_weight == enum6.min_weight(D)


def test_tree_json_uses_labels():
    D = np.array([[0, 1, 2], [1, 0, 3], [2, 3, 0]], dtype=float)
    obj = mst(DistanceMatrix(("AAA", "BBB", "CCC"), D)).to_json()
    assert obj["edges"] == [{"a": "AAA", "b": "BBB", "w": 1.0}, {"a": "AAA", "b": "CCC", "w": 2.0}]
