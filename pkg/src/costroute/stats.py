"""Welch's unequal-variance t-test.

The two-sided p-value is ``I_x(dof/2, 1/2)`` with ``x = dof / (dof + t^2)``,
where ``I`` is the regularized incomplete beta function evaluated by its
continued fraction (modified Lentz).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DegenerateError, ValidationError

_TINY = 1e-300


def _beta_cf(a: float, b: float, x: float, eps: float = 1e-15, max_iter: int = 10_000) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        # odd step
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
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b) for a, b > 0."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the fraction converges fast only below the mean; use symmetry above it
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


@dataclass(frozen=True)
class TTestResult:
    t: float
    dof: float
    p: float


def _mean_var(xs: Sequence[float]) -> tuple[float, float]:
    n = len(xs)
    mean = math.fsum(xs) / n
    var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
    return mean, var


def welch_ttest(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-sided Welch t-test of equal means.

    Raises:
        ValidationError: fewer than two observations in either sample.
        DegenerateError: both samples have zero variance.
    """
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    if len(a) < 2 or len(b) < 2:
        raise ValidationError("each sample needs at least two observations")
    ma, va = _mean_var(a)
    mb, vb = _mean_var(b)
    if va == 0.0 and vb == 0.0:
        raise DegenerateError("both samples have zero variance")
    sa = va / len(a)
    sb = vb / len(b)
    se2 = sa + sb
    t = (ma - mb) / math.sqrt(se2)
    if se2 == 0.0:
        raise DegenerateError("sample variances underflow to zero")
    ra, rb = sa / se2, sb / se2  # normalized so the squares cannot underflow together
    dof = 1.0 / (ra * ra / (len(a) - 1) + rb * rb / (len(b) - 1))
    p = betainc(0.5 * dof, 0.5, dof / (dof + t * t))
    return TTestResult(t, dof, min(1.0, max(0.0, p)))
