"""Co-movement analytics over country panels.

Pearson correlation matrices, the distance transform ``sqrt(2 (1 - rho))``,
classical (Torgerson) MDS maps and Kruskal minimum spanning trees.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from kinex.errors import DegenerateSeriesError, InsufficientDataError
from kinex.panel import CleaningPolicy, TimeSeriesPanel


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    labels: tuple[str, ...]
    entries: np.ndarray
    # country -> reason, for countries removed before the matrix was built
    dropped: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        return _matrix_json(self.labels, self.entries)


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    labels: tuple[str, ...]
    entries: np.ndarray

    def to_json(self) -> dict:
        return _matrix_json(self.labels, self.entries)

    @classmethod
    def from_json(cls, obj: dict) -> DistanceMatrix:
        labels = tuple(obj["labels"])
        entries = np.array(obj["rows"], dtype=float)
        if entries.shape != (len(labels), len(labels)):
            raise ValueError(f"distance rows have shape {entries.shape}, expected square of {len(labels)}")
        if not np.allclose(entries, entries.T, rtol=0, atol=1e-12):
            raise ValueError("distance matrix is not symmetric")
        return cls(labels, entries)


@dataclass(frozen=True, eq=False)
class Embedding:
    labels: tuple[str, ...]
    coords: np.ndarray
    eigenvalues: np.ndarray

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "coords": [[float(v) for v in row] for row in self.coords],
            "eigenvalues": [float(v) for v in self.eigenvalues],
        }


@dataclass(frozen=True)
class SpanningTree:
    labels: tuple[str, ...]
    edges: tuple[tuple[int, int, float], ...]

    @property
    def total_weight(self) -> float:
        return math.fsum(w for _, _, w in self.edges)

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "edges": [{"a": self.labels[i], "b": self.labels[j], "w": float(w)} for i, j, w in self.edges],
        }


def _matrix_json(labels, entries) -> dict:
    return {"labels": list(labels), "rows": [[float(v) for v in row] for row in entries]}


def pearson(x, y) -> float:
    """Equal-time Pearson correlation of two equal-length series.

    Uses population moments over the common length; the result is clamped to
    [-1, 1]. A constant series has no defined correlation and raises
    :class:`DegenerateSeriesError`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"series must be 1-D and of equal length, got {x.shape} and {y.shape}")
    if x.size < 3:
        raise InsufficientDataError(f"need at least 3 observations, got {x.size}")
    if np.isnan(x).any() or np.isnan(y).any():
        raise ValueError("series contain missing values; align them first")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateSeriesError("constant series: correlation undefined")
    dx = x - x.mean()
    dy = y - y.mean()
    rho = np.dot(dx, dy) / math.sqrt(np.dot(dx, dx) * np.dot(dy, dy))
    return float(min(1.0, max(-1.0, rho)))


def _pair_problem(u: np.ndarray, v: np.ndarray, policy: CleaningPolicy) -> str | None:
    mask = ~(np.isnan(u) | np.isnan(v))
    n = int(mask.sum())
    if n < policy.min_overlap:
        return f"overlap {n} < {policy.min_overlap}"
    if np.ptp(u[mask]) == 0 or np.ptp(v[mask]) == 0:
        return "constant on overlap"
    return None


def correlation_matrix(panel: TimeSeriesPanel, policy: CleaningPolicy) -> CorrelationMatrix:
    """Pairwise-complete Pearson correlations between all countries of a panel.

    Countries that cannot be paired are removed one at a time, always the one
    with the most unusable pairs (ties: latest in panel order), until every
    remaining pair has a valid correlation. Removed countries are returned in
    ``dropped`` and announced with a warning.
    """
    values = panel.values
    alive = list(range(len(panel.countries)))
    dropped: dict[str, str] = {}

    for k in list(alive):
        obs = values[k][~np.isnan(values[k])]
        if obs.size == 0:
            dropped[panel.countries[k]] = "no observations"
            alive.remove(k)
        elif np.ptp(obs) == 0:
            dropped[panel.countries[k]] = "constant series"
            alive.remove(k)

    bad = {k: set() for k in alive}
    for a_pos, a in enumerate(alive):
        for b in alive[a_pos + 1:]:
            if _pair_problem(values[a], values[b], policy) is not None:
                bad[a].add(b)
                bad[b].add(a)

    while len(alive) >= 2 and any(bad[k] for k in alive):
        worst = max(alive, key=lambda k: (len(bad[k]), k))
        partners = ", ".join(panel.countries[p] for p in sorted(bad[worst]))
        dropped[panel.countries[worst]] = f"no valid pairing with {partners}"
        alive.remove(worst)
        for k in bad.pop(worst):
            bad[k].discard(worst)

    if dropped:
        warnings.warn(
            "dropped countries: " + "; ".join(f"{c} ({r})" for c, r in dropped.items()),
            stacklevel=2,
        )
    if len(alive) < 2:
        raise InsufficientDataError(
            f"fewer than 2 usable countries after pairing (min_overlap={policy.min_overlap})"
        )

    n = len(alive)
    entries = np.eye(n)
    for p in range(n):
        for q in range(p + 1, n):
            u, v = values[alive[p]], values[alive[q]]
            mask = ~(np.isnan(u) | np.isnan(v))
            entries[p, q] = entries[q, p] = pearson(u[mask], v[mask])
    entries.setflags(write=False)
    return CorrelationMatrix(tuple(panel.countries[k] for k in alive), entries, dropped)


def distance_matrix(c: CorrelationMatrix) -> DistanceMatrix:
    entries = np.sqrt(np.clip(2.0 * (1.0 - np.asarray(c.entries, dtype=float)), 0.0, 4.0))
    np.fill_diagonal(entries, 0.0)
    entries.setflags(write=False)
    return DistanceMatrix(tuple(c.labels), entries)


def classical_mds(d: DistanceMatrix, dims: int = 2) -> Embedding:
    """Torgerson scaling: double-centre ``-D**2 / 2`` and keep the top eigenpairs.

    The trivial eigenpair along the constant vector is excluded, so up to
    ``N - 1`` informative axes are available. Negative eigenvalues mean the
    distances are not Euclidean. Coordinates use
    ``sqrt(max(lambda, 0))`` but the raw eigenvalues are kept in the result.
    Each axis is oriented so that its largest-magnitude coordinate is positive.
    """
    D = np.asarray(d.entries, dtype=float)
    n = D.shape[0]
    if n < 2:
        raise InsufficientDataError(f"MDS needs at least 2 points, got {n}")
    if not 1 <= dims <= n - 1:
        raise ValueError(f"dims must be in [1, {n - 1}] for {n} points, got {dims}")

    J = np.eye(n) - np.full((n, n), 1.0 / n)
    B = -0.5 * J @ (D**2) @ J
    B = 0.5 * (B + B.T)
    # the constant vector is a trivial null direction of B; push it below the spectrum
    shift = 1.0 + 2.0 * np.abs(B).sum()
    evals, evecs = np.linalg.eigh(B - shift * np.full((n, n), 1.0 / n))
    order = np.argsort(evals)[::-1][:dims]
    evals = evals[order]
    evecs = evecs[:, order]

    coords = evecs * np.sqrt(np.maximum(evals, 0.0))
    for k in range(dims):
        if coords[np.argmax(np.abs(coords[:, k])), k] < 0:
            coords[:, k] = -coords[:, k]

    if (evals < 0).any():
        warnings.warn(
            f"non-Euclidean distances: retained eigenvalues include negatives {evals[evals < 0].tolist()}",
            stacklevel=2,
        )
    return Embedding(tuple(d.labels), coords, evals)


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.components = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.components -= 1
        return True


def mst(d: DistanceMatrix) -> SpanningTree:
    """Kruskal minimum spanning tree; ties broken by ``(weight, i, j)`` ascending."""
    D = np.asarray(d.entries, dtype=float)
    n = D.shape[0]
    if n < 2:
        raise InsufficientDataError(f"spanning tree needs at least 2 nodes, got {n}")
    candidates = sorted((float(D[i, j]), i, j) for i in range(n) for j in range(i + 1, n))
    uf = UnionFind(n)
    edges = []
    for w, i, j in candidates:
        if uf.union(i, j):
            edges.append((i, j, w))
            if len(edges) == n - 1:
                break
    return SpanningTree(tuple(d.labels), tuple(edges))
