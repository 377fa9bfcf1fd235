import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ptwalker.diffusion import compute_D_closed_form
from ptwalker.gaussian import unit_covariance
from ptwalker.poisson import (
    Grid, PoissonSolution, apply, build_adjoint, build_generator, compute_variance, discrete_inner,
    feynman_kac_g, grid_error_estimate, mu_weights, solve_poisson, verify_lyapunov,
)

D1 = compute_D_closed_form(1.0)


def cos_f(th, k):
    return np.cos(th)


def g_cos_oracle(theta0, kappa0, alpha=1.0):
    """Semi-analytic g for f = cos(theta): -int_0^inf E[cos theta_s | y0] ds with the Gaussian law."""
    f = lambda s: math.cos(theta0 + (1 - math.exp(-s)) * kappa0) * math.exp(-alpha**2 * unit_covariance(s)[1, 1] / 2)  # noqa: E731
    return -integrate.quad(f, 0, 60, limit=400, epsabs=1e-13)[0]


@pytest.fixture(scope="module")
def ref_cos():
    return solve_poisson(cos_f, Grid(128, 257, 6.0), 1.0)


@pytest.mark.parametrize("args", [(6, 65, 6.0), (7, 65, 6.0), (16, 64, 6.0), (16, 7, 6.0), (16, 65, 0.0)])
def test_grid_validation(args):
    with pytest.raises(ValueError):
        Grid(*args)


def test_kappa_cut_must_cover_five_alpha():
    with pytest.raises(ValueError):
        build_generator(Grid(16, 33, 4.0), 1.0)


def test_grid_parse_and_nodes():
    g = Grid.parse("32x65", 6.0)
    assert g.shape == (32, 65)
    assert g.kappa[32] == 0.0
    assert g.h_kappa == pytest.approx(0.1875)
    with pytest.raises(ValueError):
        Grid.parse("32-65", 6.0)


def test_mu_weights_normalized():
    w = mu_weights(Grid(16, 65, 6.0), 1.0)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.ptp(w, axis=0).max() == 0.0


@pytest.mark.parametrize("builder", [build_generator, build_adjoint])
@pytest.mark.parametrize("scheme", ["upwind1", "upwind2"])
def test_generator_kills_constants_and_is_exact_on_kappa(builder, scheme):
    grid = Grid(16, 65, 6.0)
    L = builder(grid, 1.0, scheme)
    assert np.max(np.abs(apply(L, np.ones(grid.shape)))) < 1e-12
    _, k = grid.mesh()
    Lk = apply(L, k)
    assert np.max(np.abs(Lk[:, 1:-1] + k[:, 1:-1])) < 1e-12


def test_generator_on_cos_theta():
    errs = []
    for n in (32, 64, 128):
        grid = Grid(n, 65, 6.0)
        th, k = grid.mesh()
        errs.append(np.max(np.abs(apply(build_generator(grid, 1.0), np.cos(th)) + k * np.sin(th))))
        L1 = build_generator(grid, 1.0, "upwind1")
        err1 = np.max(np.abs(apply(L1, np.cos(th)) + k * np.sin(th)))
        assert err1 < 6.0 * grid.h_theta
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_adjoint_flips_transport():
    grid = Grid(32, 65, 6.0)
    th, k = grid.mesh()
    # second-order transport error is about K h^2 / 3
    assert np.max(np.abs(apply(build_adjoint(grid, 1.0), np.cos(th)) - k * np.sin(th))) < 6.0 * grid.h_theta**2 / 2


def test_generator_offdiagonals_nonnegative_first_order():
    L = build_generator(Grid(16, 65, 6.0), 0.5, "upwind1").tocoo()
    off = L.data[L.row != L.col]
    assert off.min() >= 0


def test_discrete_duality_vanishes_under_refinement():
    def u(th, k):
        return np.cos(th) * np.exp(-0.1 * k**2) + 0.3 * k * np.sin(2 * th)

    def v(th, k):
        return np.sin(th + 0.4) * (1 + 0.2 * k) + 0.1 * k**2

    gaps = []
    for nt, nk in ((32, 65), (64, 129), (128, 257)):
        grid = Grid(nt, nk, 6.0)
        U, V = grid.evaluate(u), grid.evaluate(v)
        lhs = discrete_inner(apply(build_generator(grid, 1.0), U), V, grid, 1.0)
        rhs = discrete_inner(U, apply(build_adjoint(grid, 1.0), V), grid, 1.0)
        gaps.append(abs(lhs - rhs))
    assert gaps[2] < gaps[1] < gaps[0]
    assert gaps[2] < 1e-3


def test_lyapunov_identity():
    assert verify_lyapunov(Grid(64, 129, 6.0), 1.0).max_centered <= 1e-10
    devs = [verify_lyapunov(Grid(16, nk, 6.0), 0.5) for nk in (33, 65, 129)]
    assert all(d.n_upwind > 0 for d in devs)
    assert all(d.max_centered <= 1e-10 for d in devs)
    slopes = np.log2([devs[0].max_upwind / devs[1].max_upwind, devs[1].max_upwind / devs[2].max_upwind])
    assert np.all(np.abs(slopes - 1) <= 0.3)


def test_lyapunov_pointwise_at_zero():
    alpha = 0.8
    assert 2 * alpha**2 - 0 - 0 == pytest.approx(-2 * 1 + 2 * (alpha**2 + 1))


def test_zero_rhs():
    sol = solve_poisson(np.zeros((16, 33)), Grid(16, 33, 6.0), 1.0)
    assert not np.any(sol.g) and sol.V_f == 0 and sol.V_f_alt == 0


def test_minus_kappa_gives_kappa():
    sol = solve_poisson(lambda th, k: -k, Grid(32, 129, 6.0), 1.0)
    _, k = sol.grid.mesh()
    inner = np.abs(sol.grid.kappa) <= 4
    assert np.max(np.abs(sol.g - k)[:, inner]) < 1e-4
    assert sol.V_f == pytest.approx(2.0, rel=1e-3)
    assert sol.V_f_alt == pytest.approx(2.0, rel=1e-3)


def test_compute_variance_exact_inputs():
    grid = Grid(16, 129, 6.0)
    _, k = grid.mesh()
    w = mu_weights(grid, 1.3)
    m2 = float(np.sum(w * k * k))
    V, V_alt = compute_variance(k, -k, grid, 1.3)
    assert V == pytest.approx(2 * 1.3**2, rel=1e-12)
    assert V_alt == pytest.approx(2 * m2, rel=1e-12)
    assert compute_variance(np.zeros(grid.shape), np.zeros(grid.shape), grid, 1.0) == (0.0, 0.0)


def test_cos_theta_variance_is_D(ref_cos):
    assert ref_cos.V_f == pytest.approx(D1, rel=0.01)
    assert ref_cos.V_f_alt == pytest.approx(ref_cos.V_f, rel=0.02)
    assert abs(ref_cos.mu_mean()) <= 1e-12
    assert abs(ref_cos.compatibility_defect) < 1e-12
    assert ref_cos.algebraic_residual < 1e-9


def test_cos_theta_solution_matches_semi_analytic_g(ref_cos):
    for th, k in ((0.0, 0.0), (1.0, 0.5), (0.5, 2.0)):
        node_th = ref_cos.grid.theta[int(round(th / ref_cos.grid.h_theta)) % 128]
        node_k = ref_cos.grid.kappa[np.argmin(np.abs(ref_cos.grid.kappa - k))]
        assert ref_cos.value_at(th, k) == pytest.approx(g_cos_oracle(node_th, node_k), abs=0.01)


def test_cos_theta_solution_parity(ref_cos):
    # (theta, kappa) -> (-theta, -kappa) maps the grid onto itself
    g = ref_cos.g
    flipped = g[(-np.arange(128)) % 128][:, ::-1]
    assert np.max(np.abs(g - flipped)) < 1e-10


def test_residual_converges():
    res = [solve_poisson(cos_f, Grid(nt, nk, 6.0), 1.0).residual_inf for nt, nk in ((32, 65), (64, 129), (128, 257))]
    assert res[0] > res[1] > res[2]
    assert math.log(res[0] / res[2]) / math.log(4) >= 1.0


def test_first_order_theta_scheme_still_converges():
    v = [solve_poisson(cos_f, Grid(nt, nk, 6.0), 1.0, theta_scheme="upwind1").V_f for nt, nk in ((32, 65), (64, 129))]
    assert abs(v[1] - D1) < abs(v[0] - D1)


def test_kappa_cut_invariance():
    a = solve_poisson(cos_f, Grid(128, 257, 6.0), 1.0).V_f
    b = solve_poisson(cos_f, Grid(128, 343, 8.0), 1.0).V_f
    assert abs(a - b) / a < 0.005


def test_mean_projection_reported():
    sol = solve_poisson(lambda th, k: k**2, Grid(32, 129, 6.0), 1.0)
    assert sol.mean_projection == pytest.approx(1.0, rel=1e-6)
    assert sol.V_f == pytest.approx(2.0, rel=1e-3)


def test_incompatible_rhs_raises():
    grid = Grid(16, 33, 6.0)
    f = np.zeros(grid.shape)
    f[:, -1] = 1e6  # mass where mu-weights vanish cannot be balanced
    with pytest.raises(ValueError):
        solve_poisson(f, grid, 1.0, defect_tol=1e-12)


@settings(max_examples=15)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_variance_nonnegative(c):
    def f(th, k):
        return c[0] * np.cos(th) + c[1] * np.sin(2 * th) + c[2] * k * np.cos(th) + c[3] * np.tanh(k)

    sol = solve_poisson(f, Grid(16, 65, 6.0), 1.0)
    assert sol.V_f >= 0


def test_csv_and_summary(tmp_path, ref_cos):
    ref_cos.to_csv(tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "theta,kappa,g"
    assert len(lines) == 1 + 128 * 257
    s = ref_cos.summary()
    assert {"V_f", "V_f_alt", "residual_inf", "grid"} <= set(s)
    assert isinstance(ref_cos, PoissonSolution)


def test_feynman_kac_zero_f():
    r = feynman_kac_g((0.0, 0.0), lambda th, k: np.zeros_like(th), 20.0, 64, seed=1)
    assert r.value == 0.0 and r.se == 0.0


def test_feynman_kac_needs_long_horizon():
    with pytest.raises(ValueError):
        feynman_kac_g((0, 0), cos_f, 10.0, 64, seed=1)


def test_feynman_kac_matches_oracle_and_grid(ref_cos):
    r = feynman_kac_g((0.0, 0.0), cos_f, 20.0, 8000, seed=3, dt=0.02)
    assert abs(r.value - g_cos_oracle(0.0, 0.0)) < 4 * r.se
    assert abs(r.value - ref_cos.value_at(0, 0)) < max(3 * r.se, grid_error_estimate(cos_f, Grid(64, 129, 6.0), 1.0, 0, 0))


def test_feynman_kac_antisymmetry():
    a = feynman_kac_g((1.0, 0.5), cos_f, 20.0, 4000, seed=5, dt=0.02)
    b = feynman_kac_g((2 * math.pi - 1.0, -0.5), cos_f, 20.0, 4000, seed=6, dt=0.02)
    assert abs(a.value - b.value) < 3 * math.hypot(a.se, b.se)


def test_feynman_kac_worker_invariance():
    a = feynman_kac_g((0.3, 0.1), cos_f, 20.0, 300, seed=2, dt=0.05, workers=1)
    b = feynman_kac_g((0.3, 0.1), cos_f, 20.0, 300, seed=2, dt=0.05, workers=4)
    assert a == b


def test_semi_analytic_oracle_values():
    assert g_cos_oracle(0.0, 0.0) == pytest.approx(-2.14345, abs=1e-5)
    assert g_cos_oracle(1.0, 0.5) == pytest.approx(g_cos_oracle(2 * math.pi - 1.0, -0.5), abs=1e-12)
