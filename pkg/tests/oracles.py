"""Independent reference computations used to check the library.

Nothing here calls into the code path it is checking.
"""

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy import integrate


def pearson_fraction(x, y) -> Fraction:
    """Square of Pearson's rho, signed, in exact rational arithmetic (avoids the sqrt)."""
    x = [Fraction(v) for v in x]
    y = [Fraction(v) for v in y]
    T = len(x)
    mx, my = sum(x) / T, sum(y) / T
    mxy = sum(a * b for a, b in zip(x, y)) / T
    mxx = sum(a * a for a in x) / T
    myy = sum(b * b for b in y) / T
    cov = mxy - mx * my
    return cov * abs(cov) / ((mxx - mx * mx) * (myy - my * my))


def pearson_moments(x, y) -> float:
    """Pearson rho written literally as moment averages over the series length."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    num = np.mean(x * y) - np.mean(x) * np.mean(y)
    den = math.sqrt((np.mean(x * x) - np.mean(x) ** 2) * (np.mean(y * y) - np.mean(y) ** 2))
    return num / den


def prufer_trees(n: int) -> list[list[tuple[int, int]]]:
    """Every labelled tree on n nodes, decoded from all n**(n-2) Pruefer sequences."""
    trees = []
    for seq in itertools.product(range(n), repeat=n - 2):
        degree = [1] * n
        for v in seq:
            degree[v] += 1
        edges = []
        for v in seq:
            leaf = min(k for k in range(n) if degree[k] == 1)
            edges.append((min(leaf, v), max(leaf, v)))
            degree[leaf] -= 1
            degree[v] -= 1
        u, w = [k for k in range(n) if degree[k] == 1]
        edges.append((u, w))
        trees.append(edges)
    return trees


class SpanningTreeEnumerator:
    """Brute-force minimum spanning tree weight over all labelled trees of K_n."""

    def __init__(self, n: int):
        self.n = n
        self.trees = prufer_trees(n)
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        index = {p: k for k, p in enumerate(pairs)}
        self.pairs = pairs
        self.edge_index = np.array([[index[e] for e in t] for t in self.trees])

    def min_weight(self, D: np.ndarray) -> float:
        w = np.array([D[i, j] for i, j in self.pairs])
        totals = w[self.edge_index].sum(axis=1)
        # resolve near-ties by an exactly rounded sum
        near = np.flatnonzero(totals <= totals.min() + 1e-9)
        return min(math.fsum(w[self.edge_index[k]]) for k in near)


def ols_normal_equations(x, y):
    """Slope, intercept and their standard errors from (X'X) b = X'y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    X = np.column_stack([np.ones_like(x), x])
    XtX = X.T @ X
    beta = np.linalg.solve(XtX, X.T @ y)
    resid = y - X @ beta
    s2 = resid @ resid / (len(x) - 2)
    cov = s2 * np.linalg.inv(XtX)
    return beta[1], beta[0], math.sqrt(cov[1, 1]), math.sqrt(cov[0, 0])


def t_density(t: float, dof: float) -> float:
    log_c = math.lgamma((dof + 1) / 2) - math.lgamma(dof / 2) - 0.5 * math.log(dof * math.pi)
    return math.exp(log_c - (dof + 1) / 2 * math.log1p(t * t / dof))


def t_cdf_quadrature(t: float, dof: float) -> float:
    if t == 0:
        return 0.5
    area, _ = integrate.quad(t_density, 0.0, abs(t), args=(dof,), epsabs=1e-14, epsrel=1e-14, limit=200)
    return 0.5 + math.copysign(area, t)


def gini_pairwise(z) -> float:
    z = [float(v) for v in z]
    n = len(z)
    total = math.fsum(abs(a - b) for a in z for b in z)
    return total / (2 * n * math.fsum(z))
