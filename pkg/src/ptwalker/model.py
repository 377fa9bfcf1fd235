"""Model parameters, states and pointwise model functions.

The kinetic variables are the velocity angle ``theta`` and the curvature
``kappa``.  Under the default Ornstein-Uhlenbeck drift the pair has the
invariant law ``mu = Uniform[0, 2pi) x N(0, alpha**2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats

TWO_PI = 2.0 * math.pi

# Smoothing scale of the power-law drift near kappa = 0.
POWER_LAW_EPS = 1e-6


@dataclass(frozen=True)
class SpeedProfile:
    """Speed as a function of ``|kappa|``.

    ``kind`` is one of ``"unit"``, ``"rational_decay"`` (``a / (1 + b|kappa|)``)
    or ``"table"`` (monotone linear interpolation on ``|kappa|``, constant
    extrapolation).
    """

    kind: str = "unit"
    a: float = 1.0
    b: float = 0.0
    table_kappa: tuple[float, ...] = ()
    table_speed: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "unit":
            return
        if self.kind == "rational_decay":
            if not (self.a > 0 and math.isfinite(self.a)):
                raise ValueError(f"rational_decay needs a > 0, got {self.a}")
            if not (self.b >= 0 and math.isfinite(self.b)):
                raise ValueError(f"rational_decay needs b >= 0, got {self.b}")
            return
        if self.kind == "table":
            k = np.asarray(self.table_kappa, dtype=float)
            c = np.asarray(self.table_speed, dtype=float)
            if k.ndim != 1 or k.shape != c.shape or k.size < 1:
                raise ValueError("speed table needs matching non-empty kappa/speed columns")
            if np.any(k < 0) or np.any(np.diff(k) <= 0):
                raise ValueError("speed table |kappa| nodes must be >= 0 and strictly increasing")
            if np.any(c <= 0) or not np.all(np.isfinite(c)):
                raise ValueError("speed table values must be positive and finite")
            if np.any(np.diff(c) > 0):
                raise ValueError("speed table values must be non-increasing in |kappa|")
            return
        raise ValueError(f"unknown speed profile {self.kind!r}")

    @classmethod
    def unit(cls) -> SpeedProfile:
        return cls("unit")

    @classmethod
    def rational_decay(cls, a: float, b: float) -> SpeedProfile:
        return cls("rational_decay", a=float(a), b=float(b))

    @classmethod
    def table(cls, kappa, speed) -> SpeedProfile:
        return cls("table", table_kappa=tuple(map(float, kappa)), table_speed=tuple(map(float, speed)))

    @property
    def c_max(self) -> float:
        if self.kind == "unit":
            return 1.0
        if self.kind == "rational_decay":
            return self.a
        return max(self.table_speed)

    def __call__(self, kappa):
        ak = np.abs(kappa)
        if self.kind == "unit":
            out = np.ones_like(ak, dtype=float)
        elif self.kind == "rational_decay":
            out = self.a / (1.0 + self.b * ak)
        else:
            out = np.interp(ak, self.table_kappa, self.table_speed)
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "unit":
            return {"kind": "unit"}
        if self.kind == "rational_decay":
            return {"kind": "rational_decay", "a": self.a, "b": self.b}
        return {"kind": "table", "kappa": list(self.table_kappa), "speed": list(self.table_speed)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> SpeedProfile:
        kind = d.get("kind", "unit")
        if kind == "unit":
            return cls.unit()
        if kind == "rational_decay":
            return cls.rational_decay(d["a"], d["b"])
        if kind == "table":
            return cls.table(d["kappa"], d["speed"])
        raise ValueError(f"unknown speed profile {kind!r}")


@dataclass(frozen=True)
class Drift:
    """Curvature drift: ``"ou"`` (``-kappa``) or ``"power_law"`` with exponent ``p``.

    The power law ``-sign(k)|k|**p`` is smoothed as
    ``-k * (eps**2 + k**2)**((p - 1) / 2)`` so it is Lipschitz at 0.
    """

    kind: str = "ou"
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in ("ou", "power_law"):
            raise ValueError(f"unknown drift {self.kind!r}")
        if self.kind == "power_law" and not (self.p > 0 and math.isfinite(self.p)):
            raise ValueError(f"power_law drift needs p > 0, got {self.p}")

    @classmethod
    def ou(cls) -> Drift:
        return cls("ou")

    @classmethod
    def power_law(cls, p: float) -> Drift:
        return cls("power_law", float(p))

    def __call__(self, kappa):
        kappa = np.asarray(kappa, dtype=float)
        if self.kind == "ou":
            out = -kappa
        else:
            out = -kappa * (POWER_LAW_EPS**2 + kappa**2) ** ((self.p - 1.0) / 2.0)
        return float(out) if out.ndim == 0 else out

    def potential(self, kappa):
        """``V`` with ``V' = -drift`` and ``V(0) = eps**(p+1)/(p+1)``."""
        kappa = np.asarray(kappa, dtype=float)
        if self.kind == "ou":
            return 0.5 * kappa**2
        q = self.p + 1.0
        return (POWER_LAW_EPS**2 + kappa**2) ** (q / 2.0) / q

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "ou"} if self.kind == "ou" else {"kind": "power_law", "p": self.p}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Drift:
        kind = d.get("kind", "ou")
        return cls.ou() if kind == "ou" else cls.power_law(d["p"])


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    speed: SpeedProfile = field(default_factory=SpeedProfile.unit)
    drift: Drift = field(default_factory=Drift.ou)

    def __post_init__(self):
        a = self.alpha
        if isinstance(a, bool) or not isinstance(a, (int, float)) or not math.isfinite(a) or a <= 0:
            raise ValueError(f"alpha must be a positive finite real, got {a!r}")
        object.__setattr__(self, "alpha", float(a))

    def to_dict(self) -> dict[str, Any]:
        return {"alpha": self.alpha, "speed": self.speed.to_dict(), "drift": self.drift.to_dict()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ModelParams:
        if "alpha" not in d:
            raise ValueError("model parameters need 'alpha'")
        return cls(
            alpha=d["alpha"],
            speed=SpeedProfile.from_dict(d.get("speed", {"kind": "unit"})),
            drift=Drift.from_dict(d.get("drift", {"kind": "ou"})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ModelParams:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class KineticState:
    """``(theta, kappa)`` on the cylinder; ``theta`` is stored reduced mod 2pi.

    Fields may be scalars or equally shaped arrays (a batch of states).
    """

    theta: Any
    kappa: Any

    def __post_init__(self):
        kappa = self.kappa
        if not np.all(np.isfinite(kappa)):
            raise ValueError("kappa must be finite")
        object.__setattr__(self, "theta", reduce_angle(self.theta))


@dataclass(frozen=True)
class FullState:
    """Position, unwrapped angle and curvature of one walker."""

    x: tuple[float, float]
    theta_unwrapped: float
    kappa: float

    @property
    def kinetic(self) -> KineticState:
        return KineticState(self.theta_unwrapped, self.kappa)

    @classmethod
    def at_origin(cls, theta: float = 0.0, kappa: float = 0.0) -> FullState:
        return cls((0.0, 0.0), float(theta), float(kappa))


def reduce_angle(theta):
    out = np.mod(theta, TWO_PI)
    # np.mod can return exactly 2pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def tau(theta) -> np.ndarray:
    """Unit heading vector ``(cos theta, sin theta)``; last axis has length 2."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def speed(params: ModelParams, kappa):
    return params.speed(kappa)


def sample_invariant(params: ModelParams, rng: np.random.Generator, size=None) -> KineticState:
    """Draw from ``mu``: uniform angle, Gaussian curvature with variance alpha**2.

    Only defined for the OU drift; see :func:`sample_invariant_power_law`.
    """
    if params.drift.kind != "ou":
        raise ValueError("sample_invariant needs the OU drift; use sample_invariant_power_law")
    theta = rng.uniform(0.0, TWO_PI, size=size)
    kappa = params.alpha * rng.standard_normal(size=size)
    return KineticState(theta, kappa)


def power_law_scale(params: ModelParams) -> float:
    q = params.drift.p + 1.0
    return (q * params.alpha**2) ** (1.0 / q)


def sample_invariant_power_law(params: ModelParams, rng: np.random.Generator, size=None) -> KineticState:
    """Draw from ``Uniform(theta) x exp(-V(kappa)/alpha**2)`` for a power-law drift.

    With ``V(k) ~ |k|**(p+1)/(p+1)`` the curvature marginal is a generalized
    normal with shape ``p + 1``; the ``eps``-smoothing of ``V`` near zero is
    ignored (relative effect below 1e-12).
    """
    if params.drift.kind != "power_law":
        raise ValueError("sample_invariant_power_law needs a power_law drift")
    theta = rng.uniform(0.0, TWO_PI, size=size)
    kappa = stats.gennorm.rvs(params.drift.p + 1.0, scale=power_law_scale(params), size=size, random_state=rng)
    return KineticState(theta, kappa)


def invariant_density(y: KineticState, params: ModelParams):
    """Density of ``mu`` w.r.t. ``dtheta dkappa`` on ``[0, 2pi) x R``."""
    if params.drift.kind != "ou":
        raise ValueError("invariant_density is the OU-drift product density")
    a2 = params.alpha**2
    kappa = np.asarray(y.kappa, dtype=float)
    out = np.exp(-(kappa**2) / (2.0 * a2)) / (TWO_PI * math.sqrt(TWO_PI * a2))
    out = out * np.ones_like(np.asarray(y.theta, dtype=float))
    return float(out) if out.ndim == 0 else out
