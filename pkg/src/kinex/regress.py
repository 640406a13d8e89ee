"""Simple OLS of Gini on savings, with Student-t inference.

The t distribution CDF is computed from the regularized incomplete beta
function, evaluated by a Lentz continued fraction.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from kinex.comove import pearson
from kinex.errors import DegenerateSeriesError, InsufficientDataError, NumericError
from kinex.panel import CleaningPolicy, TimeSeriesPanel, align_panels

_TINY = 1e-300
_EPS = 1e-16
_MAX_ITER = 10_000


def _beta_cf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for I_x(a, b)
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise NumericError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)`` for ``a, b > 0`` and ``0 <= x <= 1``."""
    if a <= 0 or b <= 0:
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _beta_cf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, dof: float) -> float:
    """Two-sided tail probability ``P(|T| >= |t|)`` for ``dof`` degrees of freedom."""
    if dof <= 0:
        raise ValueError(f"dof must be positive, got {dof}")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    return betainc_regularized(0.5 * dof, 0.5, dof / (dof + t * t))


def student_t_cdf(t: float, dof: float) -> float:
    tail = 0.5 * student_t_sf2(t, dof)
    return 1.0 - tail if t > 0 else tail


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    se_slope: float
    se_intercept: float
    t_slope: float
    p_slope: float
    r_squared: float
    n_obs: int

    def predict(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)

    def to_json(self) -> dict:
        return asdict(self)


def ols_fit(x, y) -> RegressionResult:
    """Closed-form least squares fit of ``y = intercept + slope * x``.

    Standard errors use the residual variance with ``n - 2`` degrees of freedom
    and the p-value is two-sided. With zero residual variance the t statistic is
    infinite (p = 0) unless the slope is also zero, in which case t = 0, p = 1.
    A constant ``y`` reports r_squared = 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"x and y must be 1-D and of equal length, got {x.shape} and {y.shape}")
    n = x.size
    if n < 3:
        raise InsufficientDataError(f"OLS needs at least 3 observations, got {n}")
    if np.ptp(x) == 0:
        raise DegenerateSeriesError("regressor has zero variance")

    x_mean, y_mean = x.mean(), y.mean()
    dx, dy = x - x_mean, y - y_mean
    sxx = float(np.dot(dx, dx))
    slope = float(np.dot(dx, dy)) / sxx
    intercept = float(y_mean - slope * x_mean)
    resid = y - (intercept + slope * x)
    sse = float(np.dot(resid, resid))
    sst = float(np.dot(dy, dy))
    dof = n - 2
    s2 = sse / dof
    se_slope = math.sqrt(s2 / sxx)
    se_intercept = math.sqrt(s2 * (1.0 / n + x_mean * x_mean / sxx))

    if se_slope > 0:
        t = slope / se_slope
        p = student_t_sf2(t, dof)
    elif slope != 0:
        t = math.copysign(math.inf, slope)
        p = 0.0
    else:
        t, p = 0.0, 1.0
    r2 = min(1.0, max(0.0, 1.0 - sse / sst)) if sst > 0 else 0.0
    return RegressionResult(slope, intercept, se_slope, se_intercept, t, p, r2, n)


def cross_section(
    gini: TimeSeriesPanel, gds: TimeSeriesPanel, year: int
) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    """Countries observed in both panels in ``year``: ``(codes, gds_values, gini_values)``.

    Panels are expected to be cleaned already.
    """
    gds_col = gds.column(year)
    gini_col = gini.column(year)
    codes, xs, ys = [], [], []
    for code in gds.countries:
        if code not in gini.countries:
            continue
        xv = gds_col[gds.index_of(code)]
        yv = gini_col[gini.index_of(code)]
        if math.isnan(xv) or math.isnan(yv):
            continue
        codes.append(code)
        xs.append(xv)
        ys.append(yv)
    return tuple(codes), np.array(xs), np.array(ys)


def cross_indicator_correlation(
    gini: TimeSeriesPanel,
    gds: TimeSeriesPanel,
    code: str,
    policy: CleaningPolicy | None = None,
) -> float:
    """Pearson correlation of one country's Gini and savings series over shared years."""
    policy = policy or CleaningPolicy()
    _, g, s = align_panels(gini, gds, code, policy)
    return pearson(g, s)
