r"""Finite differences for the hypo-elliptic generator and its Poisson equation.

The generator ``L = alpha^2 d_kk - kappa d_k + kappa d_theta`` acts on
functions periodic in ``theta`` and (after truncation) on ``kappa in [-K, K]``.

Discretisation on a tensor grid (``theta``-major node order, index
``j * n_kappa + i``):

* ``alpha^2 d_kk``: centered second differences.
* ``-kappa d_k``: centered first differences, switching to first-order upwind
  where the cell Peclet number ``|kappa| h_k / (2 alpha^2)`` exceeds 1.
* ``kappa d_theta``: upwind in ``theta`` following ``sign(kappa)``; second-order
  (three-point) by default, first-order available.
* ``kappa = +-K``: homogeneous Neumann (reflecting ghost node, no drift term).

The Poisson problem ``L g = f`` is solved as the bordered system::

    [ L_h   1 ] [g]   [f]
    [ w^T   0 ] [c] = [0]

with ``w`` the discrete ``mu`` weights.  ``c`` is the compatibility defect of
``f`` against the discrete invariant law; it vanishes for ``f = cos theta``
and ``f = -kappa`` by the grid's symmetries.

The asymptotic variance is reported in two forms that agree in the limit,
``V_f = 2 alpha^2 int |d_k g|^2 dmu`` (the martingale bracket) and
``V_f_alt = -2 int g f dmu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import rng as prng
from .model import TWO_PI, ModelParams, reduce_angle
from .simulator import n_steps_for, run_paths

THETA_SCHEMES = ("upwind1", "upwind2")


@dataclass(frozen=True)
class Grid:
    n_theta: int
    n_kappa: int
    kappa_cut: float

    def __post_init__(self):
        if self.n_theta < 8 or self.n_theta % 2:
            raise ValueError(f"n_theta must be even and >= 8, got {self.n_theta}")
        if self.n_kappa < 9 or self.n_kappa % 2 == 0:
            raise ValueError(f"n_kappa must be odd and >= 9, got {self.n_kappa}")
        if not self.kappa_cut > 0:
            raise ValueError("kappa_cut must be > 0")

    @classmethod
    def parse(cls, spec: str, kappa_cut: float) -> Grid:
        """``"128x257"`` -> ``Grid(128, 257, kappa_cut)``."""
        try:
            nt, nk = (int(v) for v in spec.lower().split("x"))
        except ValueError:
            raise ValueError(f"grid must look like 128x257, got {spec!r}") from None
        return cls(nt, nk, float(kappa_cut))

    @property
    def h_theta(self) -> float:
        return TWO_PI / self.n_theta

    @property
    def h_kappa(self) -> float:
        return 2.0 * self.kappa_cut / (self.n_kappa - 1)

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.n_theta) * self.h_theta

    @property
    def kappa(self) -> np.ndarray:
        return np.linspace(-self.kappa_cut, self.kappa_cut, self.n_kappa)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_kappa)

    def mesh(self):
        return np.meshgrid(self.theta, self.kappa, indexing="ij")

    def evaluate(self, f) -> np.ndarray:
        th, ka = self.mesh()
        out = np.asarray(f(th, ka), dtype=float)
        return np.broadcast_to(out, self.shape).copy()

    def refined(self) -> Grid:
        return Grid(2 * self.n_theta, 2 * self.n_kappa - 1, self.kappa_cut)

    def coarsened(self) -> Grid:
        return Grid(self.n_theta // 2, (self.n_kappa + 1) // 2, self.kappa_cut)


def check_grid(grid: Grid, alpha: float) -> None:
    if grid.kappa_cut < 5.0 * alpha - 1e-12:
        raise ValueError(f"kappa_cut={grid.kappa_cut} must be >= 5*alpha={5 * alpha}")


def mu_weights(grid: Grid, alpha: float) -> np.ndarray:
    """Discrete invariant weights on the nodes, summing to 1."""
    wk = np.exp(-grid.kappa**2 / (2.0 * alpha**2))
    wk /= wk.sum()
    return np.outer(np.full(grid.n_theta, 1.0 / grid.n_theta), wk)


def peclet(grid: Grid, alpha: float) -> np.ndarray:
    return np.abs(grid.kappa) * grid.h_kappa / (2.0 * alpha**2)


def _kappa_operator(grid: Grid, alpha: float) -> sp.csr_matrix:
    n, h = grid.n_kappa, grid.h_kappa
    k = grid.kappa
    diff = alpha**2 / h**2
    rows, cols, vals = [], [], []

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    upwind = peclet(grid, alpha) > 1.0
    for i in range(n):
        if i == 0 or i == n - 1:
            nb = 1 if i == 0 else n - 2
            add(i, nb, 2.0 * diff)
            add(i, i, -2.0 * diff)
            continue
        b = -k[i]
        if not upwind[i]:
            lo, hi = diff - b / (2 * h), diff + b / (2 * h)
        elif b < 0:
            lo, hi = diff - b / h, diff
        else:
            lo, hi = diff, diff + b / h
        add(i, i - 1, lo)
        add(i, i + 1, hi)
        add(i, i, -(lo + hi))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _theta_operator(grid: Grid, direction: int, scheme: str) -> sp.csr_matrix:
    """One-sided difference toward increasing (+1) or decreasing (-1) theta, periodic."""
    n, h = grid.n_theta, grid.h_theta
    j = np.arange(n)
    if scheme == "upwind1":
        rows = np.r_[j, j]
        cols = np.r_[(j + direction) % n, j]
        vals = np.r_[np.full(n, 1.0), np.full(n, -1.0)] / h
    elif scheme == "upwind2":
        rows = np.r_[j, j, j]
        cols = np.r_[j, (j + direction) % n, (j + 2 * direction) % n]
        vals = np.r_[np.full(n, -3.0), np.full(n, 4.0), np.full(n, -1.0)] / (2 * h)
    else:
        raise ValueError(f"unknown theta scheme {scheme!r}")
    # a one-sided difference toward -theta approximates -d_theta; flip to get d_theta
    return sp.csr_matrix((direction * vals, (rows, cols)), shape=(n, n))


def _assemble(grid: Grid, alpha: float, transport_sign: int, theta_scheme: str) -> sp.csr_matrix:
    check_grid(grid, alpha)
    v = transport_sign * grid.kappa
    eye_t = sp.identity(grid.n_theta, format="csr")
    kap = sp.kron(eye_t, _kappa_operator(grid, alpha))
    # velocity v > 0 moves mass toward +theta, so the backward operator looks ahead (+1)
    ahead = sp.kron(_theta_operator(grid, +1, theta_scheme), sp.diags(np.maximum(v, 0.0)))
    behind = sp.kron(_theta_operator(grid, -1, theta_scheme), sp.diags(np.minimum(v, 0.0)))
    return (kap + ahead + behind).tocsr()


def build_generator(grid: Grid, alpha: float, theta_scheme: str = "upwind2") -> sp.csr_matrix:
    """Sparse ``L_h`` acting on node vectors (``theta``-major)."""
    return _assemble(grid, alpha, +1, theta_scheme)


def build_adjoint(grid: Grid, alpha: float, theta_scheme: str = "upwind2") -> sp.csr_matrix:
    """Sparse ``L*_h``: ``L_h`` with the ``theta``-transport reversed."""
    return _assemble(grid, alpha, -1, theta_scheme)


def apply(op: sp.spmatrix, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return (op @ u.ravel()).reshape(u.shape)


def discrete_inner(u, v, grid: Grid, alpha: float) -> float:
    return float(np.sum(mu_weights(grid, alpha) * u * v))


@dataclass(frozen=True)
class LyapunovReport:
    max_centered: float
    max_upwind: float
    n_upwind: int
    h_kappa: float


def verify_lyapunov(grid: Grid, alpha: float, theta_scheme: str = "upwind2") -> LyapunovReport:
    """Deviation of ``L*_h H`` from ``-2H + 2(alpha^2 + 1)`` for ``H = 1 + kappa^2``.

    Interior ``kappa`` nodes only, split by whether the centered or the upwind
    stencil is active there; ``nan`` when a region is empty.
    """
    H = grid.evaluate(lambda th, k: 1.0 + k**2)
    lhs = apply(build_adjoint(grid, alpha, theta_scheme), H)
    dev = np.abs(lhs - (-2.0 * H + 2.0 * (alpha**2 + 1.0)))[:, 1:-1]
    up = (peclet(grid, alpha) > 1.0)[1:-1]
    central = dev[:, ~up]
    upw = dev[:, up]
    return LyapunovReport(
        float(central.max()) if central.size else float("nan"),
        float(upw.max()) if upw.size else float("nan"),
        int(up.sum()),
        grid.h_kappa,
    )


@dataclass
class PoissonSolution:
    g: np.ndarray
    residual_inf: float
    V_f: float
    V_f_alt: float
    grid: Grid
    alpha: float
    compatibility_defect: float = 0.0
    mean_projection: float = 0.0
    algebraic_residual: float = 0.0
    theta_scheme: str = "upwind2"
    extras: dict = field(default_factory=dict)

    def value_at(self, theta: float, kappa: float) -> float:
        """``g`` at the node nearest to ``(theta, kappa)``."""
        j = int(round(reduce_angle(theta) / self.grid.h_theta)) % self.grid.n_theta
        i = int(np.argmin(np.abs(self.grid.kappa - kappa)))
        return float(self.g[j, i])

    def mu_mean(self) -> float:
        return float(np.sum(mu_weights(self.grid, self.alpha) * self.g))

    def summary(self) -> dict:
        return {
            "V_f": self.V_f,
            "V_f_alt": self.V_f_alt,
            "residual_inf": self.residual_inf,
            "algebraic_residual": self.algebraic_residual,
            "compatibility_defect": self.compatibility_defect,
            "mean_projection": self.mean_projection,
            "g_mu_mean": self.mu_mean(),
            "alpha": self.alpha,
            "theta_scheme": self.theta_scheme,
            "grid": {"n_theta": self.grid.n_theta, "n_kappa": self.grid.n_kappa, "kappa_cut": self.grid.kappa_cut},
        }

    def to_csv(self, path) -> None:
        th, ka = self.grid.mesh()
        with open(path, "w") as fh:
            fh.write("theta,kappa,g\n")
            for a, b, c in zip(th.ravel(), ka.ravel(), self.g.ravel()):
                fh.write(f"{a!r},{b!r},{c!r}\n")


def compute_variance(g: np.ndarray, f: np.ndarray, grid: Grid, alpha: float) -> tuple[float, float]:
    """``(2 alpha^2 sum w (D_k g)^2, -2 sum w g f)`` with centered ``kappa`` differences."""
    w = mu_weights(grid, alpha)
    dg = np.gradient(np.asarray(g, dtype=float), grid.h_kappa, axis=1, edge_order=2)
    V = 2.0 * alpha**2 * float(np.sum(w * dg * dg))
    V_alt = -2.0 * float(np.sum(w * g * f))
    return V, V_alt


def reference_residual(g: np.ndarray, f: np.ndarray, grid: Grid, alpha: float) -> float:
    """``max |L_ref g - f|`` over interior nodes.

    ``L_ref`` is a high-order reference discretisation (spectral in ``theta``,
    fourth-order centered in ``kappa``), so the value measures how well the
    discrete solution satisfies the continuous equation rather than the
    (round-off sized) algebraic residual of the linear solve.  The two
    ``kappa`` nodes next to each cut are excluded.
    """
    m = np.fft.fftfreq(grid.n_theta, 1.0 / grid.n_theta)
    g_t = np.real(np.fft.ifft(1j * m[:, None] * np.fft.fft(g, axis=0), axis=0))
    h = grid.h_kappa
    d1 = (-g[:, 4:] + 8 * g[:, 3:-1] - 8 * g[:, 1:-3] + g[:, :-4]) / (12 * h)
    d2 = (-g[:, 4:] + 16 * g[:, 3:-1] - 30 * g[:, 2:-2] + 16 * g[:, 1:-3] - g[:, :-4]) / (12 * h * h)
    k = grid.kappa[2:-2]
    r = alpha**2 * d2 - k * d1 + k * g_t[:, 2:-2] - f[:, 2:-2]
    return float(np.max(np.abs(r)))


def solve_poisson(f, grid: Grid, alpha: float, *, theta_scheme: str = "upwind2",
                  defect_tol: float = 5e-2) -> PoissonSolution:
    """Solve ``L_h g = f`` with ``sum w g = 0``.

    ``f`` is a node array of shape ``grid.shape`` or a vectorised callable
    ``f(theta, kappa)``.  A nonzero discrete ``mu``-mean of ``f`` (beyond
    1e-10) is projected out and reported as ``mean_projection``.

    Raises
    ------
    ValueError
        If the compatibility defect exceeds ``defect_tol * max(1, max|f|)``,
        which signals an ``f`` the truncated grid cannot represent (or a cut
        ``K`` that is too small).
    RuntimeError
        If the sparse solve produces non-finite values.
    """
    fv = grid.evaluate(f) if callable(f) else np.array(f, dtype=float)
    if fv.shape != grid.shape:
        raise ValueError(f"f has shape {fv.shape}, grid is {grid.shape}")
    w = mu_weights(grid, alpha)
    mean = float(np.sum(w * fv))
    projection = 0.0
    if abs(mean) > 1e-10:
        fv = fv - mean
        projection = mean

    n = fv.size
    if not np.any(fv):
        g = np.zeros(grid.shape)
        return PoissonSolution(g, 0.0, 0.0, 0.0, grid, alpha, 0.0, projection, 0.0, theta_scheme)

    L = build_generator(grid, alpha, theta_scheme)
    ones = sp.csr_matrix(np.ones((n, 1)))
    A = sp.bmat([[L, ones], [sp.csr_matrix(w.reshape(1, -1)), None]], format="csc")
    sol = spla.splu(A).solve(np.r_[fv.ravel(), 0.0])
    if not np.all(np.isfinite(sol)):
        raise RuntimeError("sparse Poisson solve failed")
    g = sol[:n].reshape(grid.shape)
    defect = float(sol[n])
    scale = max(1.0, float(np.max(np.abs(fv))))
    if abs(defect) > defect_tol * scale:
        raise ValueError(f"compatibility defect {defect:.3g} too large; check f or increase kappa_cut")
    # remove the round-off part of the gauge
    g -= float(np.sum(w * g))
    alg = float(np.max(np.abs(apply(L, g) + defect - fv)))
    V, V_alt = compute_variance(g, fv, grid, alpha)
    res = reference_residual(g, fv, grid, alpha)
    return PoissonSolution(g, res, V, V_alt, grid, alpha, defect, projection, alg, theta_scheme)


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    se: float
    n_paths: int


def feynman_kac_g(y, f, T_max: float, n_paths: int, seed: int, alpha: float = 1.0, *,
                  dt: float = 0.01, workers: int = 1, chunk: int = 512) -> MonteCarloEstimate:
    """Monte Carlo ``g(y) = -E[int_0^{T_max} f(y_s) ds | y_0 = y]``.

    ``y`` is ``(theta, kappa)``; paths use the exact scheme on the
    Feynman-Kac stream of ``seed``, and the time integral is the trapezoid
    rule on the ``dt`` grid.
    """
    if T_max < 20:
        raise ValueError("T_max must be >= 20 so the neglected tail is below e^{-20} ||f||")
    if n_paths < 2:
        raise ValueError("need at least two paths for a standard error")
    params = ModelParams(alpha)
    n = n_steps_for(T_max, dt)
    save = np.arange(n + 1)
    th0, k0 = float(y[0]), float(y[1])
    totals = np.empty(n_paths)
    for start in range(0, n_paths, chunk):
        ids = np.arange(start, min(start + chunk, n_paths))
        fr = run_paths(params, "exact", n, dt, seed, ids, (0.0, 0.0, th0, k0), save,
                       stream=prng.STREAM_FEYNMAN_KAC, workers=workers)
        vals = np.asarray(f(reduce_angle(fr[:, :, 2]), fr[:, :, 3]), dtype=float)
        totals[ids] = -dt * (vals.sum(axis=1) - 0.5 * (vals[:, 0] + vals[:, -1]))
    return MonteCarloEstimate(float(totals.mean()), float(totals.std(ddof=1) / math.sqrt(n_paths)), n_paths)


def grid_error_estimate(f, grid: Grid, alpha: float, theta: float, kappa: float,
                        theta_scheme: str = "upwind2") -> float:
    """``|g_h - g_{2h}|`` at the node nearest ``(theta, kappa)``: a conservative error bar for ``g_h``."""
    fine = solve_poisson(f, grid, alpha, theta_scheme=theta_scheme)
    coarse = solve_poisson(f, grid.coarsened(), alpha, theta_scheme=theta_scheme)
    return abs(fine.value_at(theta, kappa) - coarse.value_at(theta, kappa))
