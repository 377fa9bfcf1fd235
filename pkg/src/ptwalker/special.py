"""Lower incomplete gamma function.

Series for ``x < a + 1``, modified-Lentz continued fraction for the upper
function otherwise (the classic split; both converge fast in their region).
"""

from __future__ import annotations

import math

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _series(a: float, x: float) -> float:
    # gamma(a, x) = x^a e^{-x} sum_n x^n / (a (a+1) ... (a+n))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x))
    raise RuntimeError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _upper_cf(a: float, x: float) -> float:
    # Gamma(a, x) = e^{-x} x^a / (x + 1 - a - 1*(1-a)/(x + 3 - a - ...))
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x)) * h
    raise RuntimeError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def lower_incomplete_gamma(a: float, x: float) -> float:
    """``gamma(a, x) = int_0^x t^{a-1} e^{-t} dt`` for ``a > 0``, ``x >= 0``."""
    if not a > 0:
        raise ValueError(f"a must be > 0, got {a}")
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return _series(a, x)
    return math.gamma(a) - _upper_cf(a, x)


def regularized_lower_gamma(a: float, x: float) -> float:
    """``P(a, x) = gamma(a, x) / Gamma(a)``."""
    if x >= a + 1.0:
        return 1.0 - _upper_cf(a, x) / math.gamma(a)
    return lower_incomplete_gamma(a, x) / math.gamma(a)
