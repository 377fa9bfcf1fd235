"""Ensemble Monte Carlo experiments and the statistical tests built on them.

Ensembles are sets of independent paths, each driven by its own counter-based
stream, so every number here is a deterministic function of
``(seed, config)`` whatever the worker count.  Summary statistics carry
delete-one jackknife standard errors computed from power sums of the
mean-centred data.

Acceptance-style tolerances (4 SE for symmetry checks, max(3 SE, 5%) for
finite-horizon variance rates, 1% significance for distribution tests) are the
defaults of the functions below.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import rng as prng
from .model import ModelParams, reduce_angle
from .simulator import n_steps_for, run_paths

SUMMARY_COLUMNS = (
    "t", "var1_over_t", "se1", "var2_over_t", "se2", "cov", "se_cov",
    "mean1", "se_mean1", "mean2", "se_mean2",
    "skew1", "se_skew1", "skew2", "se_skew2",
    "exkurt1", "se_exkurt1", "exkurt2", "se_exkurt2",
)

# ---------------------------------------------------------------- jackknife


def _jk_se(loo: np.ndarray) -> np.ndarray:
    n = loo.shape[0]
    dev = loo - loo.mean(axis=0)
    return np.sqrt((n - 1) / n * np.sum(dev * dev, axis=0))


def loo_variance(v: np.ndarray) -> np.ndarray:
    """Leave-one-out unbiased variances along axis 0."""
    n = v.shape[0]
    y = v - v.mean(axis=0)
    s1 = y.sum(axis=0)
    s2 = np.sum(y * y, axis=0)
    return (s2 - y * y - (s1 - y) ** 2 / (n - 1)) / (n - 2)


def loo_covariance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    ya = a - a.mean(axis=0)
    yb = b - b.mean(axis=0)
    sa, sb = ya.sum(axis=0), yb.sum(axis=0)
    sab = np.sum(ya * yb, axis=0)
    return (sab - ya * yb - (sa - ya) * (sb - yb) / (n - 1)) / (n - 2)


def _shape_moments(p1, p2, p3, p4, m):
    # plug-in central moments from raw power sums of centred data over m points
    mu = p1 / m
    c2 = p2 / m - mu**2
    c3 = p3 / m - 3 * mu * p2 / m + 2 * mu**3
    c4 = p4 / m - 4 * mu * p3 / m + 6 * mu**2 * p2 / m - 3 * mu**4
    return c3 / c2**1.5, c4 / c2**2 - 3.0


def jackknife_shape(v: np.ndarray):
    """Skewness and excess kurtosis with jackknife SEs, along axis 0."""
    n = v.shape[0]
    y = v - v.mean(axis=0)
    y2 = y * y
    p = [y.sum(axis=0), y2.sum(axis=0), np.sum(y2 * y, axis=0), np.sum(y2 * y2, axis=0)]
    skew, kurt = _shape_moments(*p, n)
    ls, lk = _shape_moments(p[0] - y, p[1] - y2, p[2] - y2 * y, p[3] - y2 * y2, n - 1)
    return skew, _jk_se(ls), kurt, _jk_se(lk)


def jackknife_variance(v: np.ndarray):
    """``(variance, jackknife SE)`` along axis 0."""
    return np.var(v, axis=0, ddof=1), _jk_se(loo_variance(v))


# ----------------------------------------------------------------- ensembles


@dataclass(frozen=True)
class InitSpec:
    """Initial law of ``(theta, kappa)``; positions always start at the origin.

    ``kind`` is ``equilibrium`` (draw from ``mu``), ``dirac`` (fixed
    ``theta0, kappa0``), ``box`` (uniform on ``theta_range x kappa_range``) or
    ``custom`` (``sampler(seed, paths) -> (theta, kappa)``).
    """

    kind: str = "equilibrium"
    theta0: float = 0.0
    kappa0: float = 0.0
    theta_range: tuple = (0.0, 2 * math.pi)
    kappa_range: tuple = (-1.0, 1.0)
    sampler: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("equilibrium", "dirac", "box", "custom"):
            raise ValueError(f"unknown init kind {self.kind!r}")
        if self.kind == "custom" and not callable(self.sampler):
            raise ValueError("custom init needs a sampler callable")

    @classmethod
    def dirac(cls, theta0: float, kappa0: float) -> InitSpec:
        return cls("dirac", theta0=float(theta0), kappa0=float(kappa0))

    @classmethod
    def box(cls, theta_range, kappa_range) -> InitSpec:
        return cls("box", theta_range=tuple(map(float, theta_range)), kappa_range=tuple(map(float, kappa_range)))

    @classmethod
    def from_dict(cls, d: dict) -> InitSpec:
        kind = d.get("kind", "equilibrium")
        if kind == "dirac":
            return cls.dirac(d.get("theta0", 0.0), d.get("kappa0", 0.0))
        if kind == "box":
            return cls.box(d.get("theta_range", (0.0, 2 * math.pi)), d.get("kappa_range", (-1.0, 1.0)))
        return cls(kind)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "dirac":
            d.update(theta0=self.theta0, kappa0=self.kappa0)
        elif self.kind == "box":
            d.update(theta_range=list(self.theta_range), kappa_range=list(self.kappa_range))
        return d

    def draw(self, seed: int, paths, params: ModelParams):
        paths = np.asarray(paths)
        if self.kind == "equilibrium":
            if params.drift.kind != "ou":
                raise ValueError("equilibrium init is implemented for the OU drift only")
            return prng.equilibrium_init(seed, paths, params.alpha)
        if self.kind == "dirac":
            return np.full(paths.shape, self.theta0), np.full(paths.shape, self.kappa0)
        if self.kind == "box":
            return prng.box_init(seed, paths, self.theta_range, self.kappa_range)
        th, ka = self.sampler(seed, paths)
        return np.asarray(th, dtype=float), np.asarray(ka, dtype=float)


@dataclass
class Ensemble:
    """Raw per-path frames at the save times (``t = 0`` included)."""

    times: np.ndarray
    x: np.ndarray        # (n_paths, n_times, 2)
    theta: np.ndarray    # (n_paths, n_times), unwrapped
    kappa: np.ndarray
    params: ModelParams
    seed: int
    init: InitSpec
    T: float
    dt: float
    scheme: str = "exact"

    @property
    def n_paths(self) -> int:
        return self.x.shape[0]

    def index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"t={t} is not a save time")
        return i

    def snapshot(self, t: float):
        """``(theta mod 2 pi, kappa)`` across paths at save time ``t``."""
        i = self.index(t)
        return reduce_angle(self.theta[:, i]), self.kappa[:, i].copy()

    def summary(self) -> EnsembleSummary:
        return summarize(self)

    def richardson(self, T: float | None = None, component: int = 0):
        """``2 V(T) - V(T/2)`` with ``V(t) = Var(x_t)/t``; removes the ``1/t`` bias."""
        T = self.T if T is None else T
        i, j = self.index(T), self.index(T / 2)
        a, b = self.x[:, i, component], self.x[:, j, component]
        val = 2.0 * np.var(a, ddof=1) / T - np.var(b, ddof=1) / (T / 2)
        loo = 2.0 * loo_variance(a) / T - loo_variance(b) / (T / 2)
        return float(val), float(_jk_se(loo))


def run_ensemble(params: ModelParams, n_paths: int, T: float, dt: float, init=None, seed: int = 0, *,
                 save_dt: float = 1.0, workers: int = 1, scheme: str = "exact",
                 chunk: int = 25_000) -> Ensemble:
    """Simulate ``n_paths`` independent paths and keep frames every ``save_dt``."""
    init = InitSpec() if init is None else init
    if isinstance(init, dict):
        init = InitSpec.from_dict(init)
    if n_paths < 3:
        raise ValueError("need at least three paths for jackknife errors")
    n = n_steps_for(T, dt)
    stride = int(round(save_dt / dt))
    if stride < 1 or abs(stride * dt - save_dt) > 1e-9 * save_dt:
        raise ValueError("save_dt must be a multiple of dt")
    save = np.arange(0, n + 1, stride)
    if save[-1] != n:
        save = np.r_[save, n]
    out_x = np.empty((n_paths, save.size, 2))
    out_th = np.empty((n_paths, save.size))
    out_k = np.empty((n_paths, save.size))
    for start in range(0, n_paths, chunk):
        ids = np.arange(start, min(start + chunk, n_paths))
        th0, k0 = init.draw(seed, ids, params)
        fr = run_paths(params, scheme, n, dt, seed, ids, (0.0, 0.0, th0, k0), save, workers=workers)
        out_x[ids] = fr[:, :, :2]
        out_th[ids] = fr[:, :, 2]
        out_k[ids] = fr[:, :, 3]
    return Ensemble(save * dt, out_x, out_th, out_k, params, seed, init, T, dt, scheme)


def out_of_equilibrium_run(params: ModelParams, y0, n_paths: int, T: float, dt: float, seed: int = 0,
                           **kw) -> Ensemble:
    """Ensemble from a Dirac mass ``y0 = (theta0, kappa0)`` or a compact :class:`InitSpec`."""
    if isinstance(y0, InitSpec):
        if y0.kind == "equilibrium":
            raise ValueError("use run_ensemble for equilibrium starts")
        init = y0
    else:
        init = InitSpec.dirac(*y0)
    return run_ensemble(params, n_paths, T, dt, init, seed, **kw)


@dataclass
class EnsembleSummary:
    """Per-time statistics of the positions (``t > 0``).

    ``cov`` is ``cov(x1_t, x2_t) / t`` so that it sits on the same scale as the
    variance rates.
    """

    times: np.ndarray
    n_paths: int
    columns: dict

    def __getitem__(self, name) -> np.ndarray:
        return self.columns[name]

    def to_csv(self, path) -> None:
        cols = [self.times] + [self.columns[c] for c in SUMMARY_COLUMNS[1:]]
        with open(path, "w") as fh:
            fh.write(",".join(SUMMARY_COLUMNS) + "\n")
            for row in zip(*cols):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path, n_paths: int = 0) -> EnsembleSummary:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        cols = {c: data[:, k] for k, c in enumerate(SUMMARY_COLUMNS) if k}
        return cls(data[:, 0], n_paths, cols)


def summarize(ens: Ensemble) -> EnsembleSummary:
    keep = ens.times > 0
    t = ens.times[keep]
    x1 = ens.x[:, keep, 0]
    x2 = ens.x[:, keep, 1]
    n = ens.n_paths
    cols = {}
    for k, v in (("1", x1), ("2", x2)):
        var, se = jackknife_variance(v)
        cols[f"var{k}_over_t"] = var / t
        cols[f"se{k}"] = se / t
        cols[f"mean{k}"] = v.mean(axis=0)
        cols[f"se_mean{k}"] = v.std(axis=0, ddof=1) / math.sqrt(n)
        sk, sse, ku, kse = jackknife_shape(v)
        cols[f"skew{k}"], cols[f"se_skew{k}"] = sk, sse
        cols[f"exkurt{k}"], cols[f"se_exkurt{k}"] = ku, kse
    x1c = x1 - x1.mean(axis=0)
    x2c = x2 - x2.mean(axis=0)
    cols["cov"] = np.sum(x1c * x2c, axis=0) / (n - 1) / t
    cols["se_cov"] = _jk_se(loo_covariance(x1, x2)) / t
    return EnsembleSummary(t, n, cols)


@dataclass(frozen=True)
class CrossCovarianceReport:
    times: np.ndarray
    cov: np.ndarray
    se: np.ndarray
    flagged: np.ndarray
    threshold: float

    @property
    def passed(self) -> bool:
        return not bool(self.flagged.any())

    @property
    def max_z(self) -> float:
        return float(np.max(self.z))

    @property
    def z(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.se > 0, np.abs(self.cov) / self.se, np.where(self.cov == 0, 0.0, np.inf))


def cross_covariance_xy(summary: EnsembleSummary, threshold: float = 4.0) -> CrossCovarianceReport:
    """``cov(x1_t, x2_t)/t`` with SE; flags times with ``|cov|/SE > threshold``."""
    cov, se = summary["cov"], summary["se_cov"]
    rep = CrossCovarianceReport(summary.times, cov, se, np.zeros(cov.shape, bool), threshold)
    return CrossCovarianceReport(rep.times, cov, se, rep.z > threshold, threshold)


# ------------------------------------------------------------- normality


@dataclass(frozen=True)
class TestReport:
    passed: bool
    checks: dict

    def failures(self) -> list[str]:
        return [k for k, v in self.checks.items() if not v["passed"]]


def ks_critical(n: int, level: float = 0.01) -> float:
    """Two-sided Kolmogorov-Smirnov critical distance at significance ``level``."""
    return float(stats.kstwo.ppf(1.0 - level, n))


def clt_normality(samples, expected_variance: float, *, level: float = 0.01,
                  rel_tol: float = 0.05) -> TestReport:
    """Gaussianity of centred samples with a prescribed variance.

    Checks: standardized skewness ``|skew| <= 4 sqrt(6/n)``, excess kurtosis
    ``|k| <= 5 sqrt(24/n)``, variance ratio within ``max(3 SE, rel_tol)``, and
    the KS distance to ``N(0, expected_variance)`` below its ``level``
    critical value.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 10_000:
        raise ValueError(f"need at least 10^4 samples, got {n}")
    if not expected_variance > 0:
        raise ValueError("expected_variance must be > 0")
    y = x - x.mean()
    m2 = float(np.mean(y * y))
    skew = float(np.mean(y**3) / m2**1.5)
    kurt = float(np.mean(y**4) / m2**2 - 3.0)
    var = float(np.var(x, ddof=1))
    se_var = math.sqrt(max(np.mean(y**4) - m2 * m2, 0.0) / n)
    ratio = var / expected_variance
    ratio_se = se_var / expected_variance
    ks = float(stats.kstest(x, "norm", args=(0.0, math.sqrt(expected_variance))).statistic)
    crit = ks_critical(n, level)
    checks = {
        "skewness": {"value": skew, "bound": 4 * math.sqrt(6 / n)},
        "excess_kurtosis": {"value": kurt, "bound": 5 * math.sqrt(24 / n)},
        "variance_ratio": {"value": ratio, "se": ratio_se, "bound": max(3 * ratio_se, rel_tol)},
        "ks": {"value": ks, "bound": crit},
    }
    checks["skewness"]["passed"] = abs(skew) <= checks["skewness"]["bound"]
    checks["excess_kurtosis"]["passed"] = abs(kurt) <= checks["excess_kurtosis"]["bound"]
    checks["variance_ratio"]["passed"] = abs(ratio - 1) <= checks["variance_ratio"]["bound"]
    checks["ks"]["passed"] = ks <= crit
    return TestReport(all(c["passed"] for c in checks.values()), checks)


# ---------------------------------------------------------- independence


def distance_correlation(a, b) -> float:
    """Sample distance correlation (fast O(n log n) route of the ``dcor`` package)."""
    import dcor

    return float(dcor.distance_correlation(np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                                           method="mergesort"))


def default_observables(alpha: float) -> dict:
    """Bounded test functions ``h(theta, kappa)`` used against the rescaled position."""
    return {
        "cos_theta": lambda th, k: np.cos(th),
        "kappa_truncated": lambda th, k: np.where(np.abs(k) <= 3 * alpha, k, 0.0),
    }


def independence_test(a, b, *, n_perm: int = 1000, seed: int = 0, level: float = 0.01) -> TestReport:
    """Permutation test of independence between two samples.

    Pearson correlation and distance correlation are computed on the same
    ``n_perm`` permutations of ``b`` (numpy generator seeded from ``seed`` and
    the permutation stream id).  ``p = (1 + #{stat_perm >= stat}) / (n_perm + 1)``;
    the test passes when the distance-correlation ``p > level``.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("samples must have equal length")
    n = a.size
    if n < 10:
        raise ValueError("need at least 10 pairs")
    gen = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(prng.STREAM_PERMUTATION,)))
    za = (a - a.mean()) / (a.std() or 1.0)
    zb = (b - b.mean()) / (b.std() or 1.0)
    r = float(np.mean(za * zb))
    dc = distance_correlation(a, b)
    hits_r = hits_dc = 0
    for _ in range(n_perm):
        p = gen.permutation(n)
        if abs(np.mean(za * zb[p])) >= abs(r):
            hits_r += 1
        if distance_correlation(a, b[p]) >= dc:
            hits_dc += 1
    p_r = (1 + hits_r) / (n_perm + 1)
    p_dc = (1 + hits_dc) / (n_perm + 1)
    checks = {
        "pearson": {"value": r, "p": p_r, "passed": p_r > level},
        "dcor": {"value": dc, "p": p_dc, "passed": p_dc > level},
    }
    return TestReport(p_dc > level, checks)


def rescaled_samples(ens: Ensemble, epsilon: float, t: float = 1.0):
    """``eps * x_{t/eps^2}`` (both components) and the kinetic state at that time."""
    i = ens.index(t / epsilon**2)
    return epsilon * ens.x[:, i, :], reduce_angle(ens.theta[:, i]), ens.kappa[:, i]


# --------------------------------------------------------------- marginals


def equilibrium_marginal_tests(theta, kappa, alpha: float, *, level: float = 0.01) -> TestReport:
    """KS tests of ``theta mod 2 pi`` against uniform and ``kappa`` against ``N(0, alpha^2)``."""
    th = reduce_angle(np.asarray(theta, dtype=float))
    k = np.asarray(kappa, dtype=float)
    crit = ks_critical(th.size, level)
    ks_t = float(stats.kstest(th, "uniform", args=(0.0, 2 * math.pi)).statistic)
    ks_k = float(stats.kstest(k, "norm", args=(0.0, alpha)).statistic)
    checks = {
        "theta_uniform_ks": {"value": ks_t, "bound": crit, "passed": ks_t <= crit},
        "kappa_gaussian_ks": {"value": ks_k, "bound": crit, "passed": ks_k <= crit},
        "kappa_mean": {"value": float(k.mean()), "se": float(k.std(ddof=1) / math.sqrt(k.size))},
        "theta_fourier1": {"value": float(np.abs(np.mean(np.exp(1j * th))))},
    }
    return TestReport(checks["theta_uniform_ks"]["passed"] and checks["kappa_gaussian_ks"]["passed"], checks)


# ---------------------------------------------------------- autocorrelation


def autocorrelation_mc(alpha: float, lag_dt: float, n_lags: int, n_paths: int, seed: int, *,
                       workers: int = 1, chunk: int = 100_000):
    """Stationary ``E_mu cos(theta_s - theta_0)`` at ``s = 0, lag_dt, ..., n_lags*lag_dt``.

    Paths start from ``mu`` and use the exact scheme with step ``lag_dt`` on the
    autocorrelation stream.  Returns ``(s, C, se)``.
    """
    params = ModelParams(alpha)
    save = np.arange(n_lags + 1)
    acc = np.zeros(n_lags + 1)
    acc2 = np.zeros(n_lags + 1)
    for start in range(0, n_paths, chunk):
        ids = np.arange(start, min(start + chunk, n_paths))
        th0, k0 = prng.equilibrium_init(seed, ids, alpha)
        fr = run_paths(params, "exact", n_lags, lag_dt, seed, ids, (0.0, 0.0, th0, k0), save,
                       stream=prng.STREAM_AUTOCORR, workers=workers)
        c = np.cos(fr[:, :, 2] - fr[:, :1, 2])
        acc += c.sum(axis=0)
        acc2 += np.sum(c * c, axis=0)
    mean = acc / n_paths
    var = (acc2 - n_paths * mean**2) / (n_paths - 1)
    return save * lag_dt, mean, np.sqrt(np.maximum(var, 0.0) / n_paths)


# ------------------------------------------------------------------- decay


@dataclass(frozen=True)
class DecayResult:
    times: np.ndarray
    norm: np.ndarray
    se: np.ndarray
    valid: np.ndarray
    rate: float
    noise_floor: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(self.rate >= 0.5)


def decay_estimate(f, t_grid, n_outer: int, seed: int, alpha: float = 1.0, *, n_inner: int = 64,
                   dt: float = 0.1, workers: int = 1) -> DecayResult:
    """Nested Monte Carlo ``||P_t f||_{L^2(mu)}`` on ``t_grid`` and a fitted exponential rate.

    Outer points ``y ~ mu``; ``P_t f(y)`` is the mean over ``n_inner`` paths
    from ``y``.  The squared norm is bias-corrected by subtracting the inner
    sample variance over ``n_inner``.  Points where the corrected squared norm
    is below twice its standard error are flagged invalid (noise floor) and left
    out of the log-linear rate fit.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be increasing and nonnegative")
    params = ModelParams(alpha)
    probe = np.asarray(f(np.linspace(0, 2 * math.pi, 64, endpoint=False)[:, None],
                         alpha * np.linspace(-4, 4, 33)[None, :]), dtype=float)
    if np.ptp(probe) == 0:
        raise ValueError("f is constant; the decay estimate needs a non-constant zero-mean f")
    steps = np.rint(t_grid / dt).astype(np.int64)
    if np.any(np.abs(steps * dt - t_grid) > 1e-9):
        raise ValueError("t_grid must lie on the dt grid")
    uniq = np.unique(steps)
    th_o, k_o = prng.equilibrium_init(seed, np.arange(n_outer), alpha)
    sq = np.empty((n_outer, t_grid.size))
    for o in range(n_outer):
        ids = o * n_inner + np.arange(n_inner)
        fr = run_paths(params, "exact", int(uniq[-1]), dt, seed, ids, (0.0, 0.0, th_o[o], k_o[o]), uniq,
                       stream=prng.STREAM_DECAY, workers=workers)
        vals = np.asarray(f(reduce_angle(fr[:, :, 2]), fr[:, :, 3]), dtype=float)
        pos = np.searchsorted(uniq, steps)
        vals = vals[:, pos]
        m = vals.mean(axis=0)
        s2 = vals.var(axis=0, ddof=1)
        sq[o] = m * m - s2 / n_inner
    est = sq.mean(axis=0)
    est_se = sq.std(axis=0, ddof=1) / math.sqrt(n_outer)
    valid = est > 2.0 * est_se
    norm = np.sqrt(np.maximum(est, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        se = np.where(norm > 0, est_se / (2 * norm), np.sqrt(est_se))
    idx = np.nonzero(valid)[0]
    # stop the curve at the first point under the noise floor
    first_bad = np.nonzero(~valid)[0]
    if first_bad.size:
        idx = idx[idx < first_bad[0]]
    rate = float("nan")
    if idx.size >= 2:
        rate = float(-np.polyfit(t_grid[idx], np.log(norm[idx]), 1)[0])
    return DecayResult(t_grid, norm, se, valid, rate, 2.0 * est_se)


def cos_theta_decay_oracle(t, alpha: float = 1.0):
    """``||P_t cos||_{L^2(mu)}`` exactly: ``exp(-alpha^2 A22(t)/2) / sqrt 2``.

    From the Gaussian transition: ``P_t e^{i theta}(y) = e^{i(theta + (1-e^{-t}) kappa)}
    e^{-Var/2}``, whose modulus does not depend on ``y``.
    """
    from .gaussian import unit_covariance

    t = np.atleast_1d(np.asarray(t, dtype=float))
    a22 = np.array([unit_covariance(v)[1, 1] for v in t])
    return np.exp(-alpha**2 * a22 / 2) / math.sqrt(2)


# ------------------------------------------------------------------ ergodic


@dataclass(frozen=True)
class ErgodicResult:
    times: np.ndarray
    average: np.ndarray

    @property
    def final(self) -> float:
        return float(self.average[-1])


def ergodic_average(f, traj) -> ErgodicResult:
    """Running time average ``(1/t) int_0^t f(y_s) ds`` along one trajectory (``t > 0``)."""
    from .simulator import cumulative_functional

    if traj.times[-1] < 1e3:
        raise ValueError("ergodic averages need a horizon of at least 10^3")
    cum = cumulative_functional(traj, f)
    return ErgodicResult(traj.times[1:], cum[1:] / traj.times[1:])


def ergodic_band(V_f: float, T: float, k: float = 4.0) -> float:
    """``k sqrt(V_f / T)``: the CLT-scale tolerance on a time average over ``[0, T]``."""
    return k * math.sqrt(V_f / T)


def report_dict(rep) -> dict:
    """JSON-friendly view of the report dataclasses in this module."""
    d = asdict(rep) if hasattr(rep, "__dataclass_fields__") else dict(rep)
    return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in d.items()}
