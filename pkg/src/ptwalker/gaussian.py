r"""Exact Gaussian laws of the curvature/angle pair.

Started from ``(kappa0, theta0)`` the pair ``(kappa_t, theta_t)`` is Gaussian
with mean ``(e^{-t} kappa0, theta0 + (1 - e^{-t}) kappa0)`` and covariance
``alpha**2 * A_t``::

    A_t = [[1 - e^{-2t},      (1 - e^{-t})**2            ],
           [(1 - e^{-t})**2,  2t - 3 + 4e^{-t} - e^{-2t} ]]

Stationary velocity autocorrelation
-----------------------------------
Start from ``mu`` (``theta0`` uniform, ``kappa0 ~ N(0, alpha**2)``, independent).
The increment ``Z = theta_s - theta0 = (1 - e^{-s}) kappa0 + G`` is a centered
Gaussian with ``G`` independent of ``kappa0`` and ``Var G = alpha**2 A_s[1,1]``, so::

    Var Z = alpha**2 (1 - e^{-s})**2 + alpha**2 (2s - 3 + 4e^{-s} - e^{-2s})
          = 2 alpha**2 (s - 1 + e^{-s}).

For a centered Gaussian ``E[cos Z] = exp(-Var Z / 2)`` and ``E[sin Z] = 0``, hence
``E_mu[cos(theta_s - theta0)] = exp(-alpha**2 (s - 1 + e^{-s}))``.  Terms in
``theta_s + theta0 = 2 theta0 + Z`` average to zero against the uniform
``theta0``, which is why ``E_mu[cos theta0 cos theta_s] = C(s) / 2`` and the
mixed ``E_mu[cos theta0 sin theta_s]`` vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GaussianTransition:
    """Law of ``(kappa_t, theta_t)`` (kappa first) given the start point."""

    t: float
    mean: np.ndarray
    cov: np.ndarray

    def cholesky(self) -> np.ndarray:
        return covariance_factor(self.cov)


def _theta_var_unit(t: float) -> float:
    """``2t - 3 + 4e^{-t} - e^{-2t}`` without cancellation for small ``t``."""
    if t < 0.1:
        # sum_{n>=3} (-1)^n (4 - 2^n) t^n / n!
        total = 0.0
        term = t**3 / 6.0
        n = 3
        while True:
            contrib = (-1) ** n * (4.0 - 2.0**n) * term
            total += contrib
            if abs(contrib) < 1e-18 * abs(total) or n > 60:
                break
            n += 1
            term *= t / n
        return total
    return 2.0 * t + 4.0 * math.expm1(-t) - math.expm1(-2.0 * t)


def unit_covariance(t: float) -> np.ndarray:
    """``A_t``; multiply by ``alpha**2`` for the covariance."""
    if t < 0:
        raise ValueError(f"elapsed time must be >= 0, got {t}")
    e1 = -math.expm1(-t)
    a11 = -math.expm1(-2.0 * t)
    a12 = e1 * e1
    a22 = _theta_var_unit(t)
    return np.array([[a11, a12], [a12, a22]])


def transition_law(t: float, y0, alpha: float) -> GaussianTransition:
    """Exact transition law over elapsed time ``t`` from ``y0 = (kappa0, theta0)``."""
    t = float(t)
    if t < 0:
        raise ValueError(f"elapsed time must be >= 0, got {t}")
    kappa0, theta0 = float(y0[0]), float(y0[1])
    decay = math.exp(-t)
    mean = np.array([decay * kappa0, theta0 - math.expm1(-t) * kappa0])
    return GaussianTransition(t, mean, alpha**2 * unit_covariance(t))


def covariance_factor(cov: np.ndarray) -> np.ndarray:
    """Lower factor ``F`` with ``F F^T = cov``.

    Falls back to a clipped symmetric square root when round-off makes the
    Cholesky factorization fail (only at very small elapsed times).
    """
    cov = np.asarray(cov, dtype=float)
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


def sample_transition(law: GaussianTransition, rng: np.random.Generator, size=None):
    """Draw ``(kappa_t, theta_t_unwrapped)``; arrays of shape ``size`` if given.

    At ``t = 0`` the mean is returned exactly.
    """
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    z = rng.standard_normal(shape + (2,))
    f = law.cholesky()
    draw = law.mean + z @ f.T
    if size is None:
        return float(draw[0]), float(draw[1])
    return draw[..., 0], draw[..., 1]


def angle_increment_variance(t, alpha: float):
    """``Var_mu(theta_t - theta_0) = 2 alpha**2 (t - 1 + e^{-t})``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("elapsed time must be >= 0")
    # t - 1 + e^{-t} = t + expm1(-t); series below 1e-4 avoids cancellation
    small = t < 1e-4
    core = np.where(small, t * t / 2.0 - t**3 / 6.0 + t**4 / 24.0, t + np.expm1(-t))
    out = 2.0 * alpha**2 * core
    return float(out) if out.ndim == 0 else out


def velocity_autocorrelation(s, alpha: float):
    """``E_mu[cos(theta_s - theta_0)] = exp(-alpha**2 (s - 1 + e^{-s}))``."""
    out = np.exp(-0.5 * np.asarray(angle_increment_variance(s, alpha)))
    return float(out) if out.ndim == 0 else out


def ou_autocorrelation(s, alpha: float):
    """``E_mu[kappa_0 kappa_s] = alpha**2 e^{-s}``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("lag must be >= 0")
    out = alpha**2 * np.exp(-s)
    return float(out) if out.ndim == 0 else out
