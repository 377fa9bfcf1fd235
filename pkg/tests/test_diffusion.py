import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from ptwalker.diffusion import (
    compute_D_closed_form, compute_D_quadrature, diffusion_integrand, green_kubo,
)
from ptwalker.gaussian import ou_autocorrelation, velocity_autocorrelation
from ptwalker.special import lower_incomplete_gamma, regularized_lower_gamma

E1 = math.e - 1


@given(st.floats(1e-3, 60), st.floats(0, 200))
def test_incomplete_gamma_matches_scipy(a, x):
    want = special.gammainc(a, x)
    assert regularized_lower_gamma(a, x) == pytest.approx(want, rel=1e-11, abs=1e-300)


@pytest.mark.parametrize("a,x", [(1e-6, 1e-6), (0.0625, 0.0625), (1.0, 1.0), (4.0, 4.0), (16.0, 16.0),
                                 (3.0, 50.0), (0.5, 2.0), (100.0, 100.0)])
def test_incomplete_gamma_high_precision(a, x):
    with mpmath.workdps(40):
        want = float(mpmath.gammainc(a, 0, x))
    assert lower_incomplete_gamma(a, x) == pytest.approx(want, rel=1e-12)


def test_incomplete_gamma_domain():
    assert lower_incomplete_gamma(2.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        lower_incomplete_gamma(0.0, 1.0)
    with pytest.raises(ValueError):
        lower_incomplete_gamma(1.0, -1.0)


def test_integrand():
    assert diffusion_integrand(0.0, 1.0) == 1.0
    assert diffusion_integrand(1.0, 1.0) == pytest.approx(0.6922006, abs=1e-7)
    s = np.linspace(0, 30, 301)
    assert np.all(np.diff(diffusion_integrand(s, 0.7)) <= 0)
    assert np.array_equal(diffusion_integrand(s, 0.7), velocity_autocorrelation(s, 0.7))


def test_alpha_one_is_e_minus_one():
    assert compute_D_closed_form(1.0) == pytest.approx(E1, rel=1e-14)
    r = compute_D_quadrature(1.0)
    assert r.value == pytest.approx(E1, rel=1e-10)
    assert r.abs_error_bound >= 0 and r.value > 0 and r.evaluations > 0


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 2.0, 4.0])
def test_quadrature_vs_closed_form(alpha):
    assert compute_D_quadrature(alpha).value == pytest.approx(compute_D_closed_form(alpha), rel=1e-10)


@pytest.mark.parametrize("alpha", [0.1, 0.5, 2.0, 4.0])
def test_closed_form_vs_high_precision_integral(alpha):
    a = mpmath.mpf(alpha) ** 2
    with mpmath.workdps(30):
        want = float(mpmath.quad(lambda s: mpmath.exp(-a * (s - 1 + mpmath.exp(-s))), [0, 1, 10, 100, mpmath.inf]))
    assert compute_D_closed_form(alpha) == pytest.approx(want, rel=1e-12)


@given(st.floats(0.1, 5))
def test_methods_agree_on_range(alpha):
    assert compute_D_quadrature(alpha).value == pytest.approx(compute_D_closed_form(alpha), rel=1e-10)


def test_small_alpha_regime():
    a = 1e-3
    q = compute_D_quadrature(a).value
    assert q == pytest.approx(1 / a**2, rel=0.01)
    assert q == pytest.approx(compute_D_closed_form(a), rel=1e-10)


def test_D_decreasing_in_alpha():
    vals = [compute_D_closed_form(a) for a in np.logspace(-1.5, 1, 30)]
    assert np.all(np.diff(vals) < 0)


def test_error_bound_is_honest():
    for alpha in (0.3, 1.0, 3.0):
        coarse = compute_D_quadrature(alpha, 1e-6)
        fine = compute_D_quadrature(alpha, 1e-7)
        assert abs(fine.value - coarse.value) < coarse.abs_error_bound


@pytest.mark.parametrize("alpha", [0.0, -1.0])
def test_divergent_alpha_rejected(alpha):
    with pytest.raises(ValueError):
        compute_D_quadrature(alpha)
    with pytest.raises(ValueError):
        compute_D_closed_form(alpha)


def test_rel_tol_floor():
    with pytest.raises(ValueError):
        compute_D_quadrature(1.0, 1e-13)


def test_green_kubo_on_exact_samples():
    s = np.arange(0, 40.0001, 0.01)
    r = green_kubo(s, diffusion_integrand(s, 1.0))
    assert r.value == pytest.approx(E1, abs=1e-4)


def test_green_kubo_second_order_in_ds():
    errs = []
    for ds in (0.2, 0.1, 0.05):
        s = np.arange(0, 40 + ds / 2, ds)
        errs.append(abs(green_kubo(s, diffusion_integrand(s, 1.0)).value - E1))
    slopes = np.log2(np.array(errs[:-1]) / errs[1:])
    # at least second order; C'(0) = 0 and a flat far end make the trapezoid rule fourth order here
    assert np.all(slopes > 1.7)


def test_green_kubo_ou_input():
    s = np.arange(0, 30.0001, 0.01)
    r = green_kubo(s, ou_autocorrelation(s, 2.0))
    assert r.value == pytest.approx(4.0, rel=1e-4)


def test_green_kubo_zero_input():
    s = np.linspace(0, 1, 11)
    assert green_kubo(s, np.zeros(11)).value == 0.0


def test_green_kubo_with_noise_floor_and_tail():
    s = np.arange(0, 20.0001, 0.05)
    C = diffusion_integrand(s, 1.0)
    se = np.full_like(s, 1e-3)
    r = green_kubo(s, C, se)
    assert r.cutoff < 20 and r.tail > 0 and r.tail_rate == pytest.approx(1.0, rel=0.05)
    assert abs(r.value - E1) < r.error + 1e-3


def test_green_kubo_needs_decay():
    s = np.linspace(0, 5, 51)
    with pytest.raises(ValueError):
        green_kubo(s, np.ones(51), np.full(51, 1e-3))


def test_green_kubo_nonuniform_grid_rejected():
    with pytest.raises(ValueError):
        green_kubo(np.array([0.0, 0.1, 0.3]), np.ones(3))
