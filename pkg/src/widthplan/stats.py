"""Welch's t-test and Student-t helpers.

The one-sided test drives both the parameter-acceptance schedule and the
environment taxonomy, so it is implemented here from the textbook formulas
with a continued-fraction regularized incomplete beta for the t tail; no
statistics library is involved.
"""

from __future__ import annotations

import math
from typing import Sequence

from .errors import DegenerateSamples

_BETA_EPS = 3e-16
_BETA_MAX_ITER = 300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """Upper-tail probability P(T_df > t); df may be fractional."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    p = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return p if t >= 0 else 1.0 - p


def student_t_cdf(t: float, df: float) -> float:
    return 1.0 - student_t_sf(t, df)


def student_t_ppf(q: float, df: float) -> float:
    """Quantile of Student's t by bisection on the cdf."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile must be in (0, 1)")
    if q == 0.5:
        return 0.0
    hi = 1.0
    while student_t_cdf(hi, df) < q:
        hi *= 2.0
        if hi > 1e12:
            break
    lo = -1.0
    while student_t_cdf(lo, df) > q:
        lo *= 2.0
        if lo < -1e12:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if student_t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _mean_var(xs: Sequence[float]) -> tuple[float, float, int]:
    n = len(xs)
    m = sum(xs) / n
    var = sum((x - m) ** 2 for x in xs) / (n - 1)
    return m, var, n


def welch_t_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """One-sided p-value for the alternative mean(a) > mean(b).

    t = (m_a - m_b) / sqrt(s_a^2/n_a + s_b^2/n_b) with Welch-Satterthwaite
    degrees of freedom; the p-value is the upper-tail t probability. Samples
    of size < 2, or two zero-variance samples with equal means, cannot be
    tested and raise DegenerateSamples.
    """
    if len(sample_a) < 2 or len(sample_b) < 2:
        raise DegenerateSamples("both samples need at least 2 observations")
    ma, va, na = _mean_var(sample_a)
    mb, vb, nb = _mean_var(sample_b)
    sa, sb = va / na, vb / nb
    se2 = sa + sb
    if se2 == 0.0:
        if ma == mb:
            raise DegenerateSamples("zero variance in both samples with equal means")
        return 0.0 if ma > mb else 1.0
    t = (ma - mb) / math.sqrt(se2)
    df = se2 * se2 / (sa * sa / (na - 1) + sb * sb / (nb - 1))
    return student_t_sf(t, df)


def mean_confidence_interval(
    xs: Sequence[float], confidence: float = 0.90
) -> tuple[float, float]:
    """(mean, half-width) of the Student-t confidence interval.

    Constant samples (or singletons) give a zero-width interval.
    """
    n = len(xs)
    if n == 0:
        raise ValueError("empty sample")
    m = sum(xs) / n
    if n == 1:
        return m, 0.0
    var = sum((x - m) ** 2 for x in xs) / (n - 1)
    if var == 0.0:
        return m, 0.0
    tcrit = student_t_ppf(0.5 + confidence / 2.0, n - 1)
    return m, tcrit * math.sqrt(var / n)
