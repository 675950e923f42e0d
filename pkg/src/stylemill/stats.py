"""Student-t p-values via the regularized incomplete beta function."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from stylemill.errors import DataError, NumericError

CF_EPS = 1e-12
CF_MAX_ITER = 10_000
_TINY = 1e-300


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz evaluation."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAX_ITER + 1):
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
        if abs(delta - 1.0) < CF_EPS:
            return h
    raise NumericError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"betainc needs 0 <= x <= 1, got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return min(1.0, max(0.0, betainc(df / 2.0, 0.5, x)))


@dataclass(frozen=True)
class TTestResult:
    t_value: float
    p_value: float
    df: int
    n_pairs: int
    mean_difference: float

    def to_dict(self) -> dict:
        return {
            "t_value": self.t_value,
            "p_value": self.p_value,
            "df": self.df,
            "n_pairs": self.n_pairs,
            "mean_difference": self.mean_difference,
        }


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-sided paired t-test on ``a - b``.

    A negative t means ``b`` is larger on average.
    """
    if len(a) != len(b):
        raise DataError(f"paired samples differ in length ({len(a)} vs {len(b)})")
    n = len(a)
    if n < 2:
        raise DataError("paired t-test needs at least 2 pairs")
    d = [float(x) - float(y) for x, y in zip(a, b)]
    mean = math.fsum(d) / n
    var = math.fsum((v - mean) ** 2 for v in d) / (n - 1)
    sd = math.sqrt(var)
    if sd <= 1e-12 * max(1.0, abs(mean)):
        raise NumericError("t undefined for constant differences")
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, t_two_sided_p(t, n - 1), n - 1, n, mean)
