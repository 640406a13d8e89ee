"""Closed-economy kinetic exchange model with a uniform saving propensity.

In every exchange two agents keep a fraction ``lam`` of their wealth and
randomly split the pooled remainder::

    z_i' = lam * z_i + eps * (1 - lam) * (z_i + z_j)
    z_j' = lam * z_j + (1 - eps) * (1 - lam) * (z_i + z_j)

The stationary wealth distribution is well described by a Gamma law with
shape ``n = 1 + 3 lam / (1 - lam)`` and the simulated mean, whose Gini
coefficient has the closed form ``Gamma(n + 1/2) / (n Gamma(n) sqrt(pi))``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit
from scipy import integrate, special

from kinex.errors import DegenerateSeriesError, DomainError, NumericError

RNG_ALGORITHM = "numpy PCG64 seeded by SeedSequence(entropy=seed, spawn_key=(stream,))"


def n_of_lambda(lam: float) -> float:
    """Gamma shape parameter for saving propensity ``lam`` in [0, 1)."""
    if not 0.0 <= lam < 1.0:
        raise DomainError(f"saving propensity must lie in [0, 1), got {lam}")
    return 1.0 + 3.0 * lam / (1.0 - lam)


@dataclass(frozen=True)
class GammaLaw:
    """Gamma density ``a_n z**(n-1) exp(-n z / mean)`` normalised on [0, inf)."""

    n: float
    mean: float = 1.0

    def __post_init__(self):
        if not self.n >= 1.0:
            raise DomainError(f"shape n must be >= 1, got {self.n}")
        if not self.mean > 0.0:
            raise DomainError(f"mean must be positive, got {self.mean}")

    @classmethod
    def for_lambda(cls, lam: float, mean: float = 1.0) -> GammaLaw:
        return cls(n_of_lambda(lam), mean)

    @property
    def rate(self) -> float:
        return self.n / self.mean

    @property
    def mode(self) -> float:
        return (self.n - 1.0) * self.mean / self.n

    def pdf(self, z):
        return gamma_pdf(z, self)

    def cdf(self, z):
        return special.gammainc(self.n, self.rate * np.maximum(np.asarray(z, dtype=float), 0.0))


def gamma_pdf(z, law: GammaLaw):
    """Equilibrium density at ``z`` (scalar or array), evaluated in log space."""
    z = np.asarray(z, dtype=float)
    if (z < 0).any():
        raise DomainError("wealth must be non-negative")
    n, rate = law.n, law.rate
    log_pdf = n * math.log(rate) - math.lgamma(n) + special.xlogy(n - 1.0, z) - rate * z
    out = np.exp(log_pdf)
    return float(out) if out.ndim == 0 else out


def gini_analytic(n: float) -> float:
    """Closed-form Gini of the Gamma law with shape ``n``."""
    if not n >= 1.0:
        raise DomainError(f"shape n must be >= 1, got {n}")
    return math.exp(math.lgamma(n + 0.5) - math.lgamma(n) - math.log(n) - 0.5 * math.log(math.pi))


def gini_numeric(law: GammaLaw, tol: float = 1e-10) -> float:
    """Gini from the CDF functional ``(1/mu) * integral Phi (1 - Phi) dy`` by adaptive quadrature."""
    mean = law.mean

    def integrand(y):
        phi = special.gammainc(law.n, law.rate * y)
        return phi * (1.0 - phi)

    width = mean / math.sqrt(law.n)
    edges = sorted({0.0, mean, *(max(0.0, mean + k * width) for k in (-8, -4, -2, 2, 4, 8, 16))})
    pieces = list(zip(edges, edges[1:])) + [(edges[-1], math.inf)]

    total, err = 0.0, 0.0
    for lo, hi in pieces:
        value, abserr, info = integrate.quad(
            integrand, lo, hi, epsabs=1e-13, epsrel=1e-13, limit=200, full_output=True
        )[:3]
        total += value
        err += abserr
    if err / mean > tol:
        raise NumericError(
            f"Gini quadrature did not reach tolerance {tol}: estimated error {err / mean:.3e} "
            f"(n={law.n}, mean={mean}, last segment evaluations={info['neval']})"
        )
    return total / mean


def sample_gini(wealths) -> float:
    """Empirical Gini ``sum_ij |z_i - z_j| / (2 N^2 mean)`` via the sorted-rank identity."""
    z = np.sort(np.asarray(wealths, dtype=float).ravel())
    m = z.size
    if m == 0:
        raise ValueError("empty wealth vector")
    if z[0] < 0:
        raise DomainError("wealths must be non-negative")
    total = z.sum()
    if total <= 0:
        raise DegenerateSeriesError("zero total wealth: Gini undefined")
    ranks = 2.0 * np.arange(1, m + 1) - m - 1.0
    return float(np.dot(ranks, z) / (m * total))


def ks_distance(samples, law: GammaLaw) -> float:
    """Kolmogorov-Smirnov sup-distance between the sample's empirical CDF and ``law``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if m == 0:
        raise ValueError("no samples")
    F = law.cdf(x)
    upper = np.arange(1, m + 1) / m - F
    lower = F - np.arange(0, m) / m
    return float(max(upper.max(), lower.max()))


@dataclass(frozen=True, eq=False)
class WealthState:
    wealths: np.ndarray
    total: float

    def __post_init__(self):
        w = np.array(self.wealths, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("wealth state needs a 1-D vector of at least 2 agents")
        if (w < 0).any():
            raise DomainError("wealths must be non-negative")
        w.setflags(write=False)
        object.__setattr__(self, "wealths", w)

    @classmethod
    def uniform(cls, n_agents: int, initial_wealth: float = 1.0) -> WealthState:
        return cls(np.full(n_agents, float(initial_wealth)), n_agents * float(initial_wealth))

    @classmethod
    def of(cls, wealths) -> WealthState:
        w = np.asarray(wealths, dtype=float)
        return cls(w, math.fsum(w))

    def drift(self) -> float:
        """Relative gap between the current sum of wealths and the cached total."""
        return abs(math.fsum(self.wealths) - self.total) / self.total


@njit(cache=True, nogil=True)
def _pair_update(zi, zj, eps, lam):
    pool = (1.0 - lam) * (zi + zj)
    return lam * zi + eps * pool, lam * zj + (1.0 - eps) * pool


@njit(cache=True, nogil=True)
def _run_exchanges(z, lam, first, second, eps):
    # second is drawn from [0, N-1) and shifted past first so that i != j
    for k in range(first.size):
        i = first[k]
        j = second[k]
        if j >= i:
            j += 1
        z[i], z[j] = _pair_update(z[i], z[j], eps[k], lam)


def exchange_step(state: WealthState, i: int, j: int, eps: float, lam: float) -> WealthState:
    """One pairwise exchange; returns a new state with only agents ``i`` and ``j`` changed."""
    if i == j:
        raise ValueError("an agent cannot trade with itself")
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"eps must lie in [0, 1], got {eps}")
    if not 0.0 <= lam < 1.0:
        raise DomainError(f"saving propensity must lie in [0, 1), got {lam}")
    z = np.array(state.wealths)
    z[i], z[j] = _pair_update(z[i], z[j], float(eps), float(lam))
    return WealthState(z, state.total)


@dataclass(frozen=True)
class SimConfig:
    n_agents: int = 1000
    lam: float = 0.0
    sweeps: int = 5000
    thermalization: int = 1000
    seed: int = 0
    initial_wealth: float = 1.0
    snapshot_every: int = 10

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError(f"need at least 2 agents, got {self.n_agents}")
        if not 0.0 <= self.lam < 1.0:
            raise DomainError(f"saving propensity must lie in [0, 1), got {self.lam}")
        if self.sweeps < 0 or self.thermalization < 0:
            raise ValueError("sweeps and thermalization must be non-negative")
        if not self.initial_wealth > 0:
            raise ValueError(f"initial wealth must be positive, got {self.initial_wealth}")
        if self.snapshot_every < 1:
            raise ValueError(f"snapshot_every must be >= 1, got {self.snapshot_every}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def replace(self, **changes) -> SimConfig:
        return SimConfig(**{**asdict(self), **changes})


@dataclass(frozen=True, eq=False)
class SimulationResult:
    config: SimConfig
    state: WealthState
    # one row per snapshot, taken after measurement sweeps listed in snapshot_sweeps
    snapshots: np.ndarray
    snapshot_sweeps: tuple[int, ...]
    stream: int | None = None
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def drift(self) -> float:
        return self.state.drift()

    def snapshot_ginis(self) -> np.ndarray:
        return np.array([sample_gini(row) for row in self.snapshots])

    def metadata(self) -> dict:
        return {
            "config": asdict(self.config),
            "rng_algorithm": self.rng_algorithm,
            "seed": self.config.seed,
            "stream": self.stream,
            "exchanges": self.config.n_agents * (self.config.thermalization + self.config.sweeps),
            "total_wealth_initial": self.state.total,
            "total_wealth_final": math.fsum(self.state.wealths),
            "relative_drift": self.drift,
        }


def make_rng(seed: int, stream: int | None = None) -> np.random.Generator:
    spawn_key = () if stream is None else (int(stream),)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=spawn_key)))


def _sweep(rng: np.random.Generator, z: np.ndarray, lam: float) -> None:
    n = z.size
    first = rng.integers(0, n, size=n)
    second = rng.integers(0, n - 1, size=n)
    eps = rng.random(n)
    _run_exchanges(z, lam, first, second, eps)


def simulate(config: SimConfig, stream: int | None = None) -> SimulationResult:
    """Run ``thermalization`` discarded sweeps then ``sweeps`` measured ones.

    A sweep is ``n_agents`` exchanges between uniformly chosen distinct agents
    with ``eps ~ U[0, 1)``. A snapshot of all wealths is kept after every
    ``snapshot_every``-th measured sweep. The trajectory depends only on
    ``(config, stream)``.
    """
    rng = make_rng(config.seed, stream)
    z = np.full(config.n_agents, float(config.initial_wealth))
    total = config.n_agents * float(config.initial_wealth)
    lam = float(config.lam)

    for _ in range(config.thermalization):
        _sweep(rng, z, lam)

    n_snap = config.sweeps // config.snapshot_every
    snapshots = np.empty((n_snap, config.n_agents))
    taken = []
    for s in range(1, config.sweeps + 1):
        _sweep(rng, z, lam)
        if s % config.snapshot_every == 0:
            snapshots[len(taken)] = z
            taken.append(s)

    snapshots.setflags(write=False)
    return SimulationResult(config, WealthState(z, total), snapshots, tuple(taken), stream)


def batch_means_se(values, n_batches: int = 20) -> float:
    """Standard error of the mean of a correlated series from contiguous batch means."""
    v = np.asarray(values, dtype=float)
    m = v.size
    if m < 2:
        return math.nan
    b = min(n_batches, m)
    size = m // b
    means = v[m - b * size:].reshape(b, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(b))


@dataclass(frozen=True)
class GiniPoint:
    lam: float
    gini_analytic: float
    gini_monte_carlo: float
    mc_std_error: float


@dataclass(frozen=True)
class GiniCurve:
    points: tuple[GiniPoint, ...] = field(default_factory=tuple)

    def __post_init__(self):
        lams = [p.lam for p in self.points]
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("lambda values must be strictly increasing")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, else ``KINEX_THREADS``, where 0 means all cores."""
    if threads is None:
        threads = int(os.environ.get("KINEX_THREADS", "0") or 0)
    if threads < 0:
        raise ValueError(f"thread count must be >= 0, got {threads}")
    return threads or (os.cpu_count() or 1)


def _curve_point(index: int, lam: float, config: SimConfig) -> GiniPoint:
    result = simulate(config.replace(lam=lam), stream=index)
    ginis = result.snapshot_ginis()
    mc = float(ginis.mean()) if ginis.size else math.nan
    analytic = gini_analytic(n_of_lambda(lam))
    return GiniPoint(lam, analytic, mc, batch_means_se(ginis))


def gini_curve(lambdas, config: SimConfig, threads: int | None = None) -> GiniCurve:
    """Analytic and Monte Carlo Gini across a grid of saving propensities.

    Grid point ``k`` is simulated on RNG stream ``k`` of ``config.seed``, so the
    curve is identical for any thread count.
    """
    lams = [float(x) for x in lambdas]
    if not lams:
        raise ValueError("empty lambda grid")
    if any(not 0.0 <= x <= 0.99 for x in lams):
        raise DomainError("lambda grid must lie within [0, 0.99]")
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambda grid must be strictly increasing")

    workers = min(resolve_threads(threads), len(lams))
    if workers == 1:
        points = [_curve_point(k, lam, config) for k, lam in enumerate(lams)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(lambda kl: _curve_point(kl[0], kl[1], config), enumerate(lams)))
    return GiniCurve(tuple(points))


def histogram(samples, law: GammaLaw, bins: int = 50, upper: float | None = None) -> dict:
    """Binned empirical density of wealth samples next to the analytic density at bin midpoints."""
    x = np.asarray(samples, dtype=float).ravel()
    if upper is None:
        upper = float(np.quantile(x, 0.999))
    edges = np.linspace(0.0, upper, bins + 1)
    counts, _ = np.histogram(x, bins=edges)
    widths = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    return {
        "left": edges[:-1],
        "right": edges[1:],
        "count": counts,
        "empirical_density": counts / (x.size * widths),
        "analytic_density": law.pdf(mids),
    }
