"""Portable scalar special functions.

The error function here is evaluated with a fixed, documented algorithm
(Maclaurin-type series for small arguments, Lentz continued fraction for the
tail) rather than deferring to the platform libm, so results are bit-stable
across platforms at the 1e-12 level.
"""

from __future__ import annotations

import math

__all__ = ["erf", "erfc", "norm_pdf", "norm_cdf"]

_SQRT_PI = math.sqrt(math.pi)
_SQRT_2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Switch point between the series and the continued fraction.  The series
# still converges above this, just slowly; the CF is inaccurate below it.
_ERF_SWITCH = 3.2


def _erf_series(x: float) -> float:
    # erf(x) = (2/sqrt(pi)) * exp(-x^2) * sum_n (2x^2)^n x / (1*3*...*(2n+1))
    x2 = x * x
    term = x
    total = x
    n = 0
    while True:
        n += 1
        term *= 2.0 * x2 / (2.0 * n + 1.0)
        new_total = total + term
        if new_total == total:
            break
        total = new_total
        if n > 200:
            break
    return 2.0 / _SQRT_PI * math.exp(-x2) * total


def _erfc_cf(x: float) -> float:
    # Continued fraction for x >= _ERF_SWITCH (modified Lentz):
    # erfc(x) = exp(-x^2) / (x sqrt(pi)) * 1/(1 + v1/(1 + v2/(1 + ...)))
    # with v_m = m / (2 x^2).
    tiny = 1e-300
    half_inv_x2 = 0.5 / (x * x)
    f = 1.0  # b0
    c = f
    d = 0.0
    for m in range(1, 300):
        a = m * half_inv_x2
        d = 1.0 + a * d
        if d == 0.0:
            d = tiny
        c = 1.0 + a / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    return math.exp(-x * x) / (x * _SQRT_PI) / f


def erf(x: float) -> float:
    """Error function, accurate to better than 1e-13 absolute everywhere."""
    if math.isnan(x):
        return math.nan
    ax = abs(x)
    if ax < _ERF_SWITCH:
        return _erf_series(x)
    val = 1.0 - _erfc_cf(ax)
    return val if x > 0 else -val


def erfc(x: float) -> float:
    """Complementary error function, accurate in the far tail."""
    if math.isnan(x):
        return math.nan
    if x >= _ERF_SWITCH:
        if x * x > 745.0:  # exp underflows
            return 0.0
        return _erfc_cf(x)
    if x <= -_ERF_SWITCH:
        return 2.0 - erfc(-x)
    return 1.0 - _erf_series(x)


def norm_pdf(x: float) -> float:
    """Standard normal density."""
    return math.exp(-0.5 * x * x) / _SQRT_2PI


def norm_cdf(x: float) -> float:
    """Standard normal CDF via the portable erfc (tail-accurate)."""
    return 0.5 * erfc(-x / _SQRT_2)
