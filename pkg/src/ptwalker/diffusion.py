r"""The limiting diffusion constant ``D = int_0^inf exp(-alpha^2 (s - 1 + e^{-s})) ds``.

Three routes:

* adaptive quadrature plus an analytic tail bound,
* a closed form through the lower incomplete gamma function,
* Green-Kubo integration of a sampled autocorrelation curve.

Closed form
-----------
Substitute ``u = e^{-s}`` (``ds = -du/u``) and write ``a = alpha**2``::

    D = e^{a} int_0^1 u^{a-1} e^{-a u} du
      = e^{a} a^{-a} int_0^a v^{a-1} e^{-v} dv      (v = a u)
      = e^{a} a^{-a} gamma(a, a).

For ``alpha = 1``: ``e * gamma(1, 1) = e (1 - 1/e) = e - 1``.

``D`` is the per-coordinate variance rate of the limiting planar Brownian
motion: ``Var(x^1_t) / t -> D`` (and the same for ``x^2``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .gaussian import velocity_autocorrelation
from .special import lower_incomplete_gamma


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_bound: float
    truncation_T: float
    evaluations: int


@dataclass(frozen=True)
class GreenKuboResult:
    value: float
    error: float
    cutoff: float
    tail: float
    tail_rate: float


def diffusion_integrand(s, alpha: float):
    return velocity_autocorrelation(s, alpha)


def _check_alpha(alpha):
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValueError(f"alpha must be > 0 (D diverges at alpha = 0), got {alpha}")


def compute_D_quadrature(alpha: float, rel_tol: float = 1e-12) -> QuadratureResult:
    """Adaptive quadrature on ``[0, T*]`` with an analytic tail bound.

    For ``s >= T*`` the integrand is at most ``e^{a} e^{-a s}``, so the tail is
    at most ``e^{a(1 - T*)} / a``.  Since ``D >= 1/a`` (the exponent is at most
    ``a s``), ``T* = 1 + ln(1/rel_tol) / a`` keeps the tail below
    ``rel_tol * D``.  The lower end of the tail enclosure is added to the value;
    the full bound goes into ``abs_error_bound``.
    """
    _check_alpha(alpha)
    if not rel_tol >= 1e-12:
        raise ValueError(f"rel_tol must be >= 1e-12, got {rel_tol}")
    a = alpha * alpha
    t_star = 1.0 + math.log(1.0 / rel_tol) / a
    tail_bound = math.exp(a * (1.0 - t_star)) / a

    def f(s):
        return math.exp(-a * (s + math.expm1(-s)))

    # the e^{-s} relaxation lives on [0, ~40]; beyond it the integrand is a plain exponential
    knots = [0.0] + [k for k in (2.0, 10.0, 40.0) if k < t_star] + [t_star]
    value = 0.0
    err = 0.0
    evals = 0
    q_tol = max(rel_tol / 10.0, 1e-14)
    for lo, hi in zip(knots[:-1], knots[1:]):
        v, e, info = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=q_tol, limit=500, full_output=True)[:3]
        value += v
        err += e
        evals += info["neval"]
    # true tail lies in [tail_bound * exp(-a e^{-T*}), tail_bound]
    value += tail_bound * math.exp(-a * math.exp(-t_star))
    return QuadratureResult(value, err + tail_bound, t_star, evals)


def compute_D_closed_form(alpha: float) -> float:
    """``D = e^{a} a^{-a} gamma(a, a)`` with ``a = alpha**2`` (valid for ``a < 170``)."""
    _check_alpha(alpha)
    a = alpha * alpha
    if a >= 170:
        raise ValueError("closed form overflows for alpha**2 >= 170; use quadrature")
    return math.exp(a - a * math.log(a)) * lower_incomplete_gamma(a, a)


def green_kubo(s, C, se=None, *, noise_factor: float = 2.0) -> GreenKuboResult:
    """Integrate a sampled autocorrelation curve ``C(s)`` on a uniform grid from 0.

    With standard errors, the trapezoid integral stops at the first lag where
    ``|C| < noise_factor * se``; the remainder is an exponential tail fitted on
    the last decade of decay above that noise floor.  Without standard errors
    the whole grid is used and the tail is fitted on the last decade of the
    curve.

    Raises
    ------
    ValueError
        If the correlation never drops below its noise floor (too few paths).
    """
    s = np.asarray(s, dtype=float)
    C = np.asarray(C, dtype=float)
    if s.ndim != 1 or s.shape != C.shape or s.size < 3:
        raise ValueError("need matching 1-d lag and correlation arrays with at least 3 points")
    ds = np.diff(s)
    if abs(s[0]) > 1e-12 or np.ptp(ds) > 1e-9 * max(1.0, ds.mean()):
        raise ValueError("lags must be a uniform grid starting at 0")
    if not np.any(C):
        return GreenKuboResult(0.0, 0.0, float(s[-1]), 0.0, float("nan"))

    if se is not None:
        se = np.asarray(se, dtype=float)
        below = np.nonzero(np.abs(C) < noise_factor * se)[0]
        if below.size == 0:
            raise ValueError("correlation never decays below its noise floor; increase the number of paths")
        cut = int(below[0])
        floor = noise_factor * float(se[cut])
    else:
        cut = s.size - 1
        floor = abs(float(C[cut]))
    if cut < 2:
        raise ValueError("noise floor reached within the first two lags; refine the lag grid")

    body = float(np.trapezoid(C[: cut + 1], s[: cut + 1]))

    window = np.nonzero((C[: cut + 1] > 0) & (C[: cut + 1] <= 10.0 * max(floor, 1e-300)))[0]
    tail = 0.0
    rate = float("nan")
    tail_err = 0.0
    if window.size >= 4:
        coef, cov = np.polyfit(s[window], np.log(C[window]), 1, cov=True)
        lam = -coef[0]
        if lam > 0:
            rate = float(lam)
            tail = float(math.exp(np.polyval(coef, s[cut])) / lam)
            tail_err = abs(tail) * math.sqrt(max(cov[0, 0], 0.0)) / lam

    if se is not None:
        body_err = float(np.trapezoid(se[: cut + 1], s[: cut + 1]))
    else:
        coarse = float(np.trapezoid(C[: cut + 1 : 2], s[: cut + 1 : 2])) if cut % 2 == 0 else body
        body_err = abs(body - coarse) / 3.0
    return GreenKuboResult(body + tail, body_err + tail_err, float(s[cut]), tail, rate)
