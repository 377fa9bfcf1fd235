"""Pathwise simulation of position, heading and curvature.

Two schemes:

``exact``
    ``(kappa, theta)`` advanced with the exact Gaussian transition over ``dt``
    (OU drift only); position by the trapezoid rule on ``c(|kappa|) tau(theta)``.
``euler``
    Euler-Maruyama for an arbitrary curvature drift, same position quadrature.

``theta`` is carried unwrapped; observables reduce it mod 2pi.
Batch runs derive path ``i``'s noise from ``(seed, i)`` only (see ``rng``), so
any split of the paths over worker threads gives bit-identical output.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba as nb
import numpy as np

from . import rng as prng
from .gaussian import covariance_factor, transition_law, unit_covariance
from .model import POWER_LAW_EPS, FullState, KineticState, ModelParams, reduce_angle, tau

SCHEMES = ("exact", "euler")

_SPEED_CODES = {"unit": 0, "rational_decay": 1, "table": 2}


@dataclass
class Trajectory:
    """Saved frames of one path; ``theta`` is unwrapped."""

    times: np.ndarray
    x: np.ndarray  # (n, 2)
    theta: np.ndarray
    kappa: np.ndarray
    scheme: str
    dt: float

    def __len__(self):
        return self.times.size

    def frame(self, i: int) -> FullState:
        return FullState((float(self.x[i, 0]), float(self.x[i, 1])), float(self.theta[i]), float(self.kappa[i]))

    @property
    def frames(self) -> list[FullState]:
        return [self.frame(i) for i in range(len(self))]

    def to_csv(self, path, stride: int = 1) -> None:
        """Write ``t,x1,x2,theta,kappa`` rows (unwrapped theta) every ``stride`` frames."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x1", "x2", "theta", "kappa"])
            for i in range(0, len(self), stride):
                w.writerow([repr(float(v)) for v in (self.times[i], self.x[i, 0], self.x[i, 1], self.theta[i], self.kappa[i])])

    @classmethod
    def from_csv(cls, path, scheme: str = "exact") -> Trajectory:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t = data[:, 0]
        dt = float(t[1] - t[0]) if t.size > 1 else 0.0
        return cls(t, data[:, 1:3].copy(), data[:, 3].copy(), data[:, 4].copy(), scheme, dt)


# ---------------------------------------------------------------- kernels


@nb.njit(inline="always")
def _speed(kind, sa, sb, tab_k, tab_c, kappa):
    if kind == 0:
        return 1.0
    ak = abs(kappa)
    if kind == 1:
        return sa / (1.0 + sb * ak)
    return np.interp(ak, tab_k, tab_c)


@nb.njit(inline="always")
def _drift(kind, p, eps, kappa):
    if kind == 0:
        return -kappa
    return -kappa * (eps * eps + kappa * kappa) ** ((p - 1.0) / 2.0)


@nb.njit(nogil=True, cache=True)
def _exact_kernel(paths, k0, k1, stream, n_steps, save_idx, decay, gain, f11, f21, f22, dt,
                  skind, sa, sb, tab_k, tab_c, x1_0, x2_0, th_0, ka_0, out):
    half = 0.5 * dt
    for j in range(paths.size):
        p = paths[j]
        x1 = x1_0[j]
        x2 = x2_0[j]
        th = th_0[j]
        ka = ka_0[j]
        c = _speed(skind, sa, sb, tab_k, tab_c, ka)
        v1 = c * math.cos(th)
        v2 = c * math.sin(th)
        ptr = 0
        if save_idx[0] == 0:
            out[j, 0, 0] = x1
            out[j, 0, 1] = x2
            out[j, 0, 2] = th
            out[j, 0, 3] = ka
            ptr = 1
        for k in range(n_steps):
            z1, z2 = prng.nb_normal_pair(k0, k1, stream, p, k)
            nka = decay * ka + f11 * z1
            nth = th + gain * ka + f21 * z1 + f22 * z2
            c = _speed(skind, sa, sb, tab_k, tab_c, nka)
            w1 = c * math.cos(nth)
            w2 = c * math.sin(nth)
            x1 += half * (v1 + w1)
            x2 += half * (v2 + w2)
            ka = nka
            th = nth
            v1 = w1
            v2 = w2
            if ptr < save_idx.size and save_idx[ptr] == k + 1:
                out[j, ptr, 0] = x1
                out[j, ptr, 1] = x2
                out[j, ptr, 2] = th
                out[j, ptr, 3] = ka
                ptr += 1


@nb.njit(nogil=True, cache=True)
def _euler_kernel(paths, k0, k1, stream, n_steps, save_idx, dt, noise, dkind, dp, deps,
                  skind, sa, sb, tab_k, tab_c, x1_0, x2_0, th_0, ka_0, out):
    half = 0.5 * dt
    for j in range(paths.size):
        p = paths[j]
        x1 = x1_0[j]
        x2 = x2_0[j]
        th = th_0[j]
        ka = ka_0[j]
        c = _speed(skind, sa, sb, tab_k, tab_c, ka)
        v1 = c * math.cos(th)
        v2 = c * math.sin(th)
        ptr = 0
        if save_idx[0] == 0:
            out[j, 0, 0] = x1
            out[j, 0, 1] = x2
            out[j, 0, 2] = th
            out[j, 0, 3] = ka
            ptr = 1
        z2 = 0.0
        for k in range(n_steps):
            # two steps per counter block
            if k % 2 == 0:
                z, z2 = prng.nb_normal_pair(k0, k1, stream, p, k // 2)
            else:
                z = z2
            nka = ka + _drift(dkind, dp, deps, ka) * dt + noise * z
            nth = th + ka * dt
            c = _speed(skind, sa, sb, tab_k, tab_c, nka)
            w1 = c * math.cos(nth)
            w2 = c * math.sin(nth)
            x1 += half * (v1 + w1)
            x2 += half * (v2 + w2)
            ka = nka
            th = nth
            v1 = w1
            v2 = w2
            if ptr < save_idx.size and save_idx[ptr] == k + 1:
                out[j, ptr, 0] = x1
                out[j, ptr, 1] = x2
                out[j, ptr, 2] = th
                out[j, ptr, 3] = ka
                ptr += 1


def n_steps_for(T: float, dt: float) -> int:
    if not (dt > 0 and T >= dt):
        raise ValueError(f"need T >= dt > 0, got T={T}, dt={dt}")
    return int(math.ceil(T / dt - 1e-9))


def _speed_args(params: ModelParams):
    s = params.speed
    tab_k = np.asarray(s.table_kappa if s.kind == "table" else (0.0,), dtype=float)
    tab_c = np.asarray(s.table_speed if s.kind == "table" else (1.0,), dtype=float)
    return _SPEED_CODES[s.kind], float(s.a), float(s.b), tab_k, tab_c


def run_paths(params: ModelParams, scheme: str, n_steps: int, dt: float, seed: int, paths,
              init, save_idx, *, stream: int = prng.STREAM_DYNAMICS, workers: int = 1,
              alpha: float | None = None) -> np.ndarray:
    """Simulate a batch of paths and return saved frames.

    Parameters
    ----------
    paths : int array
        Global path indices; path ``i``'s noise depends only on ``(seed, stream, i)``.
    init : tuple of four arrays
        Initial ``x1, x2, theta, kappa`` per path.
    save_idx : int array
        Strictly increasing step indices (0 = initial state) to record.
    alpha : float, optional
        Noise amplitude override for the Euler scheme (``0`` gives the
        noise-free flow); defaults to ``params.alpha``.

    Returns
    -------
    ndarray of shape ``(n_paths, len(save_idx), 4)`` with columns
    ``x1, x2, theta, kappa``.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    paths = np.ascontiguousarray(paths, dtype=np.int64)
    save_idx = np.ascontiguousarray(save_idx, dtype=np.int64)
    if save_idx.size == 0 or np.any(np.diff(save_idx) <= 0) or save_idx[0] < 0 or save_idx[-1] > n_steps:
        raise ValueError("save_idx must be strictly increasing within [0, n_steps]")
    init = [np.ascontiguousarray(np.broadcast_to(np.asarray(a, dtype=float), paths.shape)) for a in init]
    out = np.empty((paths.size, save_idx.size, 4))
    k0, k1 = (np.uint64(v) for v in prng.split_seed(seed))
    skind, sa, sb, tab_k, tab_c = _speed_args(params)

    if scheme == "exact":
        if params.drift.kind != "ou":
            raise ValueError("the exact scheme needs the OU drift; use scheme='euler'")
        f = covariance_factor(params.alpha**2 * unit_covariance(dt))
        decay = math.exp(-dt)
        gain = -math.expm1(-dt)

        def work(sl):
            _exact_kernel(paths[sl], k0, k1, np.uint64(stream), n_steps, save_idx, decay, gain,
                          f[0, 0], f[1, 0], f[1, 1], dt, skind, sa, sb, tab_k, tab_c,
                          init[0][sl], init[1][sl], init[2][sl], init[3][sl], out[sl])
    else:
        a = params.alpha if alpha is None else float(alpha)
        if a < 0:
            raise ValueError("noise amplitude must be >= 0")
        noise = math.sqrt(2.0) * a * math.sqrt(dt)
        dkind = 0 if params.drift.kind == "ou" else 1

        def work(sl):
            _euler_kernel(paths[sl], k0, k1, np.uint64(stream), n_steps, save_idx, dt, noise, dkind,
                          float(params.drift.p), POWER_LAW_EPS, skind, sa, sb, tab_k, tab_c,
                          init[0][sl], init[1][sl], init[2][sl], init[3][sl], out[sl])

    n = paths.size
    workers = max(1, int(workers))
    if workers == 1 or n < 2:
        work(slice(0, n))
    else:
        bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(work, [slice(bounds[i], bounds[i + 1]) for i in range(bounds.size - 1)]))
    return out


# ------------------------------------------------------------ single steps


def advance_exact(kappa, theta, x, dt: float, params: ModelParams, z):
    """Vectorised exact step given standard normals ``z`` (shape ``(..., 2)``)."""
    if params.drift.kind != "ou":
        raise ValueError("the exact step needs the OU drift")
    kappa = np.asarray(kappa, dtype=float)
    theta = np.asarray(theta, dtype=float)
    z = np.asarray(z, dtype=float)
    f = covariance_factor(params.alpha**2 * unit_covariance(dt))
    nk = math.exp(-dt) * kappa + f[0, 0] * z[..., 0]
    nt = theta - math.expm1(-dt) * kappa + f[1, 0] * z[..., 0] + f[1, 1] * z[..., 1]

    def velocity(k, th):
        return np.asarray(params.speed(k))[..., None] * tau(th)

    return nk, nt, np.asarray(x, dtype=float) + 0.5 * dt * (velocity(kappa, theta) + velocity(nk, nt))


def step_exact(state: FullState, dt: float, params: ModelParams, rng: np.random.Generator) -> FullState:
    """One exact step: Gaussian ``(kappa, theta)`` update, trapezoid position."""
    if params.drift.kind != "ou":
        raise ValueError("the exact step needs the OU drift")
    law = transition_law(dt, (state.kappa, state.theta_unwrapped), params.alpha)
    z = rng.standard_normal(2)
    nk, nt = law.mean + law.cholesky() @ z
    c_old, c_new = params.speed(state.kappa), params.speed(nk)
    x = np.asarray(state.x) + 0.5 * dt * (
        c_old * np.array([math.cos(state.theta_unwrapped), math.sin(state.theta_unwrapped)])
        + c_new * np.array([math.cos(nt), math.sin(nt)]))
    return FullState((float(x[0]), float(x[1])), float(nt), float(nk))


def step_euler_maruyama(state: FullState, dt: float, params: ModelParams, rng: np.random.Generator,
                        alpha: float | None = None) -> FullState:
    """One Euler-Maruyama step; ``alpha`` overrides the noise amplitude (``0`` allowed)."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    a = params.alpha if alpha is None else float(alpha)
    k = state.kappa
    nk = k + params.drift(k) * dt + math.sqrt(2.0) * a * math.sqrt(dt) * rng.standard_normal()
    nt = state.theta_unwrapped + k * dt
    c_old, c_new = params.speed(k), params.speed(nk)
    th = state.theta_unwrapped
    x1 = state.x[0] + 0.5 * dt * (c_old * math.cos(th) + c_new * math.cos(nt))
    x2 = state.x[1] + 0.5 * dt * (c_old * math.sin(th) + c_new * math.sin(nt))
    return FullState((x1, x2), nt, float(nk))


# ------------------------------------------------------------ trajectories


def simulate_path(params: ModelParams, scheme: str, T: float, dt: float, init: FullState, seed: int,
                  *, path: int = 0, stride: int = 1, alpha: float | None = None) -> Trajectory:
    """Simulate ``ceil(T/dt)`` steps of one path, saving every ``stride`` steps.

    The final step is always saved.  The result is a deterministic function of
    ``(init, seed, path, dt, scheme)`` and coincides with path ``path`` of a
    batch run with the same seed.
    """
    n = n_steps_for(T, dt)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    save = np.arange(0, n + 1, stride)
    if save[-1] != n:
        save = np.append(save, n)
    data = run_paths(params, scheme, n, dt, seed, np.array([path]),
                     (init.x[0], init.x[1], init.theta_unwrapped, init.kappa), save, alpha=alpha)[0]
    return Trajectory(save * dt, data[:, :2].copy(), data[:, 2].copy(), data[:, 3].copy(), scheme, dt)


def _eval(f, theta, kappa):
    return np.asarray(f(reduce_angle(theta), kappa), dtype=float)


def cumulative_functional(traj: Trajectory, f) -> np.ndarray:
    """Running trapezoid values of ``int_0^t f(y_s) ds`` at every saved frame.

    ``f(theta, kappa)`` is vectorised; ``theta`` is passed reduced mod 2pi.  A
    vector-valued ``f`` returns a trailing axis.
    """
    vals = _eval(f, traj.theta, traj.kappa)
    if vals.ndim == 0:
        vals = np.full(traj.times.shape, float(vals))
    h = np.diff(traj.times)
    hh = h.reshape((-1,) + (1,) * (vals.ndim - 1))
    incr = 0.5 * hh * (vals[1:] + vals[:-1])
    out = np.zeros_like(vals)
    out[1:] = np.cumsum(incr, axis=0)
    return out


def additive_functional(traj: Trajectory, f):
    """Trapezoid value of ``int_0^T f(y_s) ds`` over the saved frames."""
    out = cumulative_functional(traj, f)[-1]
    return float(out) if np.ndim(out) == 0 else out


def rescale(traj: Trajectory, epsilon: float, times, f):
    """Sample ``(eps * int_0^{t/eps^2} f(y_s) ds, y_{t/eps^2})`` at each ``t`` in ``times``.

    Returns the functional values and a :class:`KineticState` batch.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    targets = times / epsilon**2
    if targets.max() > traj.times[-1] * (1 + 1e-12):
        raise ValueError(f"trajectory horizon {traj.times[-1]} shorter than t/eps^2 = {targets.max()}")
    idx = np.searchsorted(traj.times, targets - 1e-9 * np.maximum(1.0, targets))
    if np.any(np.abs(traj.times[idx] - targets) > 1e-9 * np.maximum(1.0, targets)):
        raise ValueError("requested times are not on the saved frame grid")
    cum = cumulative_functional(traj, f)
    return epsilon * cum[idx], KineticState(traj.theta[idx], traj.kappa[idx])
