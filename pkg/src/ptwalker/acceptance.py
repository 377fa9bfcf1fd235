"""Acceptance suite: eleven end-to-end checks at their stated tolerances.

Each ``criterion_<n>(seed, workers)`` returns a :class:`CriterionResult`.
Large ensembles are cached per ``(seed, workers)`` so criteria that share an
ensemble (3 and 4, 9) do not resimulate it.
"""

from __future__ import annotations

import contextlib
import io
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mcstats
from .diffusion import compute_D_closed_form, compute_D_quadrature
from .model import ModelParams
from .poisson import Grid, feynman_kac_g, grid_error_estimate, solve_poisson, verify_lyapunov
from .simulator import run_paths

E_MINUS_1 = math.e - 1.0
DEFAULT_SEED = 20240101

_cache: dict = {}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d} {self.name} ({self.seconds:.1f} s): {self.summary()}"

    def summary(self) -> str:
        keys = self.detail.get("_summary", [])
        return ", ".join(f"{k}={_fmt(self.detail[k])}" for k in keys)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.detail.items() if k != "_summary"}
        return {"number": self.number, "name": self.name, "passed": self.passed, "seconds": self.seconds,
                "detail": _jsonable(d)}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def _equilibrium_ensemble(seed, workers):
    key = ("eq", seed)
    if key not in _cache:
        _cache[key] = mcstats.run_ensemble(ModelParams(1.0), 100_000, 40.0, 0.01, None, seed,
                                           save_dt=1.0, workers=workers)
    return _cache[key]


def _dirac_ensemble(seed, workers):
    key = ("dirac", seed)
    if key not in _cache:
        _cache[key] = mcstats.out_of_equilibrium_run(ModelParams(1.0), (0.0, 3.0), 100_000, 40.0, 0.01,
                                                     seed + 9, save_dt=1.0, workers=workers)
    return _cache[key]


def clear_cache():
    _cache.clear()


# ------------------------------------------------------------------ criteria


def criterion_1(seed, workers):
    t0 = time.perf_counter()
    q = compute_D_quadrature(1.0).value
    c = compute_D_closed_form(1.0)
    cross = {}
    for a in (0.25, 0.5, 1.0, 2.0, 4.0):
        qa = compute_D_quadrature(a).value
        ca = compute_D_closed_form(a)
        cross[a] = abs(qa - ca) / ca
    runtime = time.perf_counter() - t0
    err_q = abs(q - E_MINUS_1) / E_MINUS_1
    err_c = abs(c - E_MINUS_1) / E_MINUS_1
    worst = max(cross.values())
    ok = err_q <= 1e-10 and err_c <= 1e-10 and worst <= 1e-10 and runtime < 1.0
    return ok, {"D_quadrature": q, "D_closed_form": c, "rel_err_quadrature": err_q, "rel_err_closed_form": err_c,
                "max_cross_rel_diff": worst, "cross_rel_diff": cross, "runtime_s": runtime,
                "_summary": ["D_quadrature", "rel_err_quadrature", "rel_err_closed_form", "max_cross_rel_diff",
                             "runtime_s"]}


def criterion_2(seed, workers):
    t0 = time.perf_counter()
    f_cos = lambda th, k: np.cos(th)  # noqa: E731
    ref = solve_poisson(f_cos, Grid(128, 257, 6.0), 1.0)
    levels = [Grid(32, 65, 6.0), Grid(64, 129, 6.0)]
    residuals = [solve_poisson(f_cos, g, 1.0).residual_inf for g in levels] + [ref.residual_inf]
    h = np.array([g.h_kappa for g in levels] + [ref.grid.h_kappa])
    order = float(np.polyfit(np.log(h), np.log(residuals), 1)[0])
    kap = solve_poisson(lambda th, k: -k, Grid(128, 257, 6.0), 1.0)
    runtime = time.perf_counter() - t0
    rel_cos = abs(ref.V_f - E_MINUS_1) / E_MINUS_1
    rel_k = abs(kap.V_f - 2.0) / 2.0
    ok = rel_cos <= 0.01 and order >= 1.0 and residuals[-1] < residuals[0] and rel_k <= 0.01 and runtime < 30
    return ok, {"V_f_cos": ref.V_f, "V_f_alt_cos": ref.V_f_alt, "rel_err_cos": rel_cos, "residuals": residuals,
                "residual_order": order, "V_f_minus_kappa": kap.V_f, "rel_err_minus_kappa": rel_k,
                "runtime_s": runtime,
                "_summary": ["V_f_cos", "rel_err_cos", "residual_order", "V_f_minus_kappa", "runtime_s"]}


def criterion_3(seed, workers):
    t0 = time.perf_counter()
    ens = _equilibrium_ensemble(seed, workers)
    runtime = time.perf_counter() - t0
    s = ens.summary()
    v, se = float(s["var1_over_t"][-1]), float(s["se1"][-1])
    rich, rich_se = ens.richardson()
    tol = max(3 * se, 0.05 * E_MINUS_1)
    ok = abs(v - E_MINUS_1) <= tol and abs(rich - E_MINUS_1) <= 3 * rich_se and runtime <= 330
    return ok, {"var1_over_t_T40": v, "se": se, "tolerance": tol, "richardson": rich, "richardson_se": rich_se,
                "richardson_z": (rich - E_MINUS_1) / rich_se, "D": E_MINUS_1, "runtime_s": runtime,
                "_summary": ["var1_over_t_T40", "se", "richardson", "richardson_se", "richardson_z"]}


def criterion_4(seed, workers):
    ens = _equilibrium_ensemble(seed, workers)
    rep = mcstats.cross_covariance_xy(ens.summary())
    return rep.passed, {"max_abs_cov_over_se": rep.max_z, "flagged_times": rep.times[rep.flagged],
                        "n_times": int(rep.times.size), "_summary": ["max_abs_cov_over_se", "n_times"]}


def criterion_5(seed, workers):
    n = 1_000_000
    t = math.log(2.0)
    theta0, kappa0 = 0.5, 1.0
    fr = run_paths(ModelParams(1.0), "exact", 1, t, seed + 5, np.arange(n), (0.0, 0.0, theta0, kappa0),
                   np.array([1]), workers=workers)
    k, th = fr[:, 0, 3], fr[:, 0, 2]
    want_mean = np.array([kappa0 / 2, theta0 + kappa0 / 2])
    want_cov = np.array([[0.75, 0.25], [0.25, 2 * math.log(2) - 1.25]])
    data = np.stack([k, th], axis=1)
    mean = data.mean(axis=0)
    se_mean = data.std(axis=0, ddof=1) / math.sqrt(n)
    c = data - mean
    z_mean = (mean - want_mean) / se_mean
    z_cov = np.empty((2, 2))
    cov = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            prod = c[:, i] * c[:, j]
            cov[i, j] = prod.sum() / (n - 1)
            z_cov[i, j] = (cov[i, j] - want_cov[i, j]) / (prod.std(ddof=1) / math.sqrt(n))
    worst = float(max(np.max(np.abs(z_mean)), np.max(np.abs(z_cov))))
    return worst <= 4.0, {"mean": mean, "cov": cov, "z_mean": z_mean, "z_cov": z_cov, "max_abs_z": worst,
                          "_summary": ["max_abs_z"]}


def criterion_6(seed, workers):
    s, C, se = mcstats.autocorrelation_mc(1.0, 0.5, 10, 1_000_000, seed + 6, workers=workers)
    z = {}
    for lag in (0.5, 1.0, 2.0, 5.0):
        i = int(round(lag / 0.5))
        exact = math.exp(-(lag - 1 + math.exp(-lag)))
        z[lag] = float((C[i] - exact) / se[i])
    worst = max(abs(v) for v in z.values())
    return worst <= 3.0, {"z": z, "max_abs_z": worst, "_summary": ["max_abs_z"]}


def criterion_7(seed, workers):
    central = [verify_lyapunov(g, 1.0).max_centered for g in (Grid(32, 65, 6.0), Grid(128, 257, 6.0))]
    reps = [verify_lyapunov(Grid(16, nk, 6.0), 0.5) for nk in (33, 65, 129)]
    dev = np.array([r.max_upwind for r in reps])
    slopes = np.log2(dev[:-1] / dev[1:])
    central_all = max(central + [r.max_centered for r in reps])
    ok = central_all <= 1e-10 and np.all(np.abs(slopes - 1.0) <= 0.3)
    return bool(ok), {"max_centered": central_all, "upwind_deviation": dev, "upwind_slopes": slopes,
                      "_summary": ["max_centered", "upwind_slopes"]}


def criterion_8(seed, workers):
    eps = 0.1
    t0 = time.perf_counter()
    ens = mcstats.run_ensemble(ModelParams(1.0), 10_000, 1.0 / eps**2, 0.01, None, seed + 8, save_dt=1.0,
                               workers=workers)
    xs, th, k = mcstats.rescaled_samples(ens, eps)
    a = xs[:, 0]
    clt = mcstats.clt_normality(a, E_MINUS_1)
    ratio = clt.checks["variance_ratio"]["value"]
    ks_ok = clt.checks["ks"]["passed"]
    indep = {}
    for name, h in mcstats.default_observables(1.0).items():
        rep = mcstats.independence_test(a, h(th, k), seed=seed + 80)
        indep[name] = {"passed": rep.passed, "pearson_r": rep.checks["pearson"]["value"],
                       "pearson_p": rep.checks["pearson"]["p"], "dcor": rep.checks["dcor"]["value"],
                       "dcor_p": rep.checks["dcor"]["p"]}
    indep_ok = all(v["passed"] for v in indep.values())
    ok = abs(ratio - 1) <= 0.05 and ks_ok and indep_ok
    detail = {"variance_ratio": ratio, "ks": clt.checks["ks"]["value"], "ks_critical": clt.checks["ks"]["bound"],
              "normality_checks": clt.checks, "independence": indep,
              "independence_passed": indep_ok, "runtime_s": time.perf_counter() - t0}
    for name, v in indep.items():
        detail[f"dcor_p[{name}]"] = v["dcor_p"]
    detail["_summary"] = ["variance_ratio", "ks", "ks_critical"] + [f"dcor_p[{n}]" for n in indep]
    return ok, detail


def criterion_9(seed, workers):
    eq = _equilibrium_ensemble(seed, workers)
    dr = _dirac_ensemble(seed, workers)
    se_eq, sd = eq.summary(), dr.summary()
    v_eq, v_dr = float(se_eq["var1_over_t"][-1]), float(sd["var1_over_t"][-1])
    se = math.hypot(float(se_eq["se1"][-1]), float(sd["se1"][-1]))
    tol = max(3 * se, 0.05 * v_eq)
    term_ok = abs(v_dr - v_eq) <= tol
    th, k = dr.snapshot(5.0)
    marg = mcstats.equilibrium_marginal_tests(th, k, 1.0)
    # diagnostic, not gating: the same snapshot against its exact Gaussian law from the Dirac start
    from scipy import stats

    from .gaussian import transition_law

    law = transition_law(5.0, (3.0, 0.0), 1.0)
    i5 = dr.index(5.0)
    ks_k_exact = float(stats.kstest(k, "norm", args=(law.mean[0], math.sqrt(law.cov[0, 0]))).statistic)
    ks_t_exact = float(stats.kstest(dr.theta[:, i5], "norm", args=(law.mean[1], math.sqrt(law.cov[1, 1]))).statistic)
    ok = term_ok and marg.passed
    return ok, {"var1_over_t_dirac": v_dr, "var1_over_t_equilibrium": v_eq, "tolerance": tol,
                "terminal_passed": term_ok, "marginal_checks": marg.checks, "marginals_passed": marg.passed,
                "theta_ks": marg.checks["theta_uniform_ks"]["value"],
                "kappa_ks": marg.checks["kappa_gaussian_ks"]["value"],
                "ks_critical": marg.checks["kappa_gaussian_ks"]["bound"],
                "exact_law_ks": {"kappa": ks_k_exact, "theta": ks_t_exact},
                "_summary": ["var1_over_t_dirac", "var1_over_t_equilibrium", "terminal_passed", "theta_ks",
                             "kappa_ks", "ks_critical"]}


def _cli_outputs(argv, threads) -> dict:
    from .cli import main

    with tempfile.TemporaryDirectory() as d, contextlib.redirect_stdout(io.StringIO()):
        code = main(argv + ["--threads", str(threads), "--out", d])
        if code:
            raise RuntimeError(f"ptw {' '.join(argv)} exited with {code}")
        return {p.name: p.read_bytes() for p in sorted(Path(d).iterdir()) if p.name != "run.json"}


def criterion_10(seed, workers):
    commands = {
        "simulate": ["simulate", "--preset", "figure1", "--seed", str(seed)],
        "ensemble": ["ensemble", "--alpha", "1", "--paths", "2000", "--T", "5", "--dt", "0.01",
                     "--seed", str(seed)],
        "ensemble-dirac": ["ensemble", "--alpha", "1", "--paths", "500", "--T", "2", "--dt", "0.01",
                           "--init", "dirac", "--theta0", "0", "--kappa0", "3", "--seed", str(seed)],
        "diffusion-gk": ["diffusion", "--alpha", "1", "--method", "green-kubo", "--paths", "4000",
                         "--lag-dt", "0.1", "--max-lag", "10", "--seed", str(seed)],
        "poisson": ["poisson", "--alpha", "1", "--grid", "32x65", "--seed", str(seed)],
    }
    identical = {}
    for name, argv in commands.items():
        outs = [_cli_outputs(argv, t) for t in (1, 4, 16)]
        identical[name] = all(o == outs[0] for o in outs[1:]) and bool(outs[0])
    return all(identical.values()), {"identical": identical, "_summary": list(identical)} | identical


def criterion_11(seed, workers):
    f_cos = lambda th, k: np.cos(th)  # noqa: E731
    grid = Grid(128, 257, 6.0)
    g_grid = solve_poisson(f_cos, grid, 1.0).value_at(0.0, 0.0)
    bound_grid = grid_error_estimate(f_cos, grid, 1.0, 0.0, 0.0)
    fk = feynman_kac_g((0.0, 0.0), f_cos, 20.0, 20_000, seed + 11, 1.0, workers=workers)
    tol = max(3 * fk.se, bound_grid)
    diff = abs(fk.value - g_grid)
    return diff <= tol, {"g_grid": g_grid, "g_feynman_kac": fk.value, "fk_se": fk.se, "grid_error_bound": bound_grid,
                         "abs_diff": diff, "tolerance": tol,
                         "_summary": ["g_grid", "g_feynman_kac", "fk_se", "grid_error_bound", "abs_diff"]}


CRITERIA = {
    1: ("diffusion constant exact", criterion_1),
    2: ("Poisson-solver variance", criterion_2),
    3: ("Var(x_t)/t convergence, equilibrium ensemble", criterion_3),
    4: ("zero cross-covariance", criterion_4),
    5: ("exact transition law", criterion_5),
    6: ("stationary autocorrelation", criterion_6),
    7: ("Lyapunov identity", criterion_7),
    8: ("CLT at eps=0.1", criterion_8),
    9: ("out-of-equilibrium start", criterion_9),
    10: ("determinism across worker counts", criterion_10),
    11: ("Feynman-Kac vs grid", criterion_11),
}


def run_criterion(number: int, seed: int = DEFAULT_SEED, workers: int = 1) -> CriterionResult:
    name, fn = CRITERIA[number]
    t0 = time.perf_counter()
    passed, detail = fn(seed, workers)
    return CriterionResult(number, name, bool(passed), detail, time.perf_counter() - t0)


def run_all(only=None, seed: int = DEFAULT_SEED, workers: int = 1) -> list[CriterionResult]:
    nums = sorted(CRITERIA) if not only else sorted(only)
    for n in nums:
        if n not in CRITERIA:
            raise ValueError(f"no criterion {n}")
    return [run_criterion(n, seed, workers) for n in nums]
