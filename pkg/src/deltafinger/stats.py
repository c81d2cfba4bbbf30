"""One-way ANOVA with an F-distribution tail from the regularized
incomplete beta function."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_FPMIN = 1e-300
_EPS = 1e-16
_MAX_ITER = 10000


class ZeroWithinVariance(ArithmeticError):
    pass


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz evaluation."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _FPMIN if abs(d) < _FPMIN else d
        c = 1.0 + aa / c
        c = _FPMIN if abs(c) < _FPMIN else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _FPMIN if abs(d) < _FPMIN else d
        c = 1.0 + aa / c
        c = _FPMIN if abs(c) < _FPMIN else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # The fraction converges fastest below the mean; use the symmetry otherwise.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def f_sf(f: float, df1: float, df2: float) -> float:
    """Upper tail P(F > f) of the F distribution."""
    if f <= 0.0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))


def f_cdf(f: float, df1: float, df2: float) -> float:
    return 1.0 - f_sf(f, df1, df2)


@dataclass(frozen=True)
class AnovaResult:
    f: float
    p: float
    df_between: int
    df_within: int
    ss_between: float
    ss_within: float

    @property
    def ms_between(self) -> float:
        return self.ss_between / self.df_between

    @property
    def ms_within(self) -> float:
        return self.ss_within / self.df_within


def one_way_anova(groups, resolution: float = 0.0) -> AnovaResult:
    """F = MS_between / MS_within. When every observation is identical the
    result is F = 0, p = 1.

    ``resolution`` is the absolute precision of the data: sums of squares
    below n * resolution**2 are treated as zero."""
    arrays = [np.asarray(g, dtype=float).ravel() for g in groups]
    k = len(arrays)
    if k < 2:
        raise ValueError("need at least two groups")
    if any(len(g) < 2 for g in arrays):
        raise ValueError("each group needs at least two observations")
    n = sum(len(g) for g in arrays)
    grand = np.concatenate(arrays).mean()
    ss_between = float(sum(len(g) * (g.mean() - grand) ** 2 for g in arrays))
    ss_within = float(sum(((g - g.mean()) ** 2).sum() for g in arrays))
    df_b, df_w = k - 1, n - k
    ms_b, ms_w = ss_between / df_b, ss_within / df_w
    # Sums of squares below rounding noise of the data count as zero.
    scale = float(np.concatenate(arrays).var()) + grand**2
    noise = max(1e-24 * max(scale, 1e-300), resolution**2) * n
    if ss_within <= noise:
        if ss_between <= noise:
            return AnovaResult(0.0, 1.0, df_b, df_w, ss_between, ss_within)
        raise ZeroWithinVariance("within-group variance is zero; F is unbounded")
    f = ms_b / ms_w
    return AnovaResult(f, f_sf(f, df_b, df_w), df_b, df_w, ss_between, ss_within)
