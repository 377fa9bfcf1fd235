import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from ptwalker.model import (
    Drift, FullState, KineticState, ModelParams, SpeedProfile, TWO_PI, invariant_density,
    reduce_angle, sample_invariant, sample_invariant_power_law, tau,
)


def test_tau_examples():
    assert np.allclose(tau(0.0), [1.0, 0.0], atol=1e-15)
    assert np.allclose(tau(math.pi / 2), [0.0, 1.0], atol=1e-15)
    assert np.allclose(tau(TWO_PI + 0.3), tau(0.3), atol=1e-12)


def test_tau_unit_norm():
    th = np.random.default_rng(0).uniform(-50, 50, 10_000)
    assert np.max(np.abs(np.linalg.norm(tau(th), axis=-1) - 1)) < 1e-12


def test_speed_profiles():
    assert SpeedProfile.unit()(3.7) == 1.0
    fig1 = SpeedProfile.rational_decay(1, 2)
    assert fig1(0.0) == 1.0
    assert fig1(1.0) == pytest.approx(1 / 3, abs=1e-15)
    assert fig1(-1.0) == fig1(1.0)
    k = np.linspace(0, 10, 101)
    c = fig1(k)
    assert np.all(c > 0) and np.all(c <= fig1.c_max) and np.all(np.diff(c) <= 0)


def test_speed_table_interpolates_and_extrapolates():
    sp = SpeedProfile.table([0.0, 1.0, 2.0], [1.0, 0.5, 0.25])
    assert sp(0.5) == pytest.approx(0.75)
    assert sp(-1.5) == pytest.approx(0.375)
    assert sp(10.0) == 0.25
    assert sp.c_max == 1.0


@pytest.mark.parametrize("k,c", [([0, 1], [1, 2]), ([1, 0], [1, 1]), ([0, 1], [1, 0]), ([-1, 1], [1, 1])])
def test_speed_table_rejects_bad_tables(k, c):
    with pytest.raises(ValueError):
        SpeedProfile.table(k, c)


@pytest.mark.parametrize("alpha", [0.0, -1.0, float("nan"), float("inf"), True, "1"])
def test_alpha_must_be_positive(alpha):
    with pytest.raises(ValueError):
        ModelParams(alpha)


@given(st.floats(1e-3, 10), st.floats(1e-3, 5), st.floats(0, 5), st.sampled_from(["ou", "power_law"]))
def test_params_json_roundtrip(alpha, a, b, drift):
    p = ModelParams(alpha, SpeedProfile.rational_decay(a, b), Drift.ou() if drift == "ou" else Drift.power_law(2))
    assert ModelParams.from_json(p.to_json()) == p


def test_from_dict_requires_alpha():
    with pytest.raises(ValueError):
        ModelParams.from_dict({"speed": {"kind": "unit"}})


def test_kinetic_state_reduces_angle_and_rejects_nan():
    y = KineticState(-0.5, 1.0)
    assert y.theta == pytest.approx(TWO_PI - 0.5)
    assert 0 <= reduce_angle(-1e-18) < TWO_PI
    with pytest.raises(ValueError):
        KineticState(0.0, float("nan"))
    s = FullState.at_origin(7.0, 0.2)
    assert s.kinetic.theta == pytest.approx(7.0 - TWO_PI)


def test_sample_invariant_moments():
    rng = np.random.default_rng(1)
    alpha = 1.3
    y = sample_invariant(ModelParams(alpha), rng, size=1_000_000)
    assert abs(y.kappa.mean()) < 4 * alpha / 1e3
    assert y.kappa.var() == pytest.approx(alpha**2, rel=0.01)
    n = 100_000
    assert stats.kstest(y.theta[:n], "uniform", args=(0, TWO_PI)).statistic < stats.kstwo.ppf(0.99, n)
    assert abs(np.corrcoef(y.theta, y.kappa)[0, 1]) < 4 / 1e3


def test_sample_invariant_needs_ou():
    with pytest.raises(ValueError):
        sample_invariant(ModelParams(1.0, drift=Drift.power_law(3)), np.random.default_rng())


def test_invariant_density_values_and_normalization():
    p = ModelParams(1.0)
    assert invariant_density(KineticState(0.0, 0.0), p) == pytest.approx(1 / (TWO_PI * math.sqrt(TWO_PI)))
    th = (np.arange(256) + 0.5) * TWO_PI / 256
    k = np.linspace(-8, 8, 4001)
    kk = (k[1:] + k[:-1]) / 2
    dens = invariant_density(KineticState(th[:, None], kk[None, :]), p)
    assert np.all(dens > 0)
    assert np.ptp(dens, axis=0).max() == 0.0
    total = dens.sum() * (TWO_PI / 256) * (k[1] - k[0])
    assert total == pytest.approx(1.0, abs=1e-6)


def test_power_law_drift_matches_ou_at_p1():
    k = np.array([-3.0, -1e-3, 1e-3, 2.0])
    assert np.allclose(Drift.power_law(1)(k), Drift.ou()(k), rtol=1e-12)


def test_power_law_potential_is_drift_antiderivative():
    d = Drift.power_law(3)
    k = np.linspace(-2, 2, 41)
    h = 1e-5
    num = -(d.potential(k + h) - d.potential(k - h)) / (2 * h)
    assert np.allclose(num, d(k), atol=1e-6)


@pytest.mark.parametrize("p", [1.0, 3.0])
def test_power_law_invariant_sampler_matches_density(p):
    alpha = 0.8
    params = ModelParams(alpha, drift=Drift.power_law(p))
    dens = lambda x: math.exp(-abs(x) ** (p + 1) / (p + 1) / alpha**2)  # noqa: E731
    z = integrate.quad(dens, -np.inf, np.inf)[0]
    cdf = np.vectorize(lambda x: integrate.quad(dens, -np.inf, x)[0] / z)
    y = sample_invariant_power_law(params, np.random.default_rng(2), size=20_000)
    assert stats.kstest(y.kappa, cdf).pvalue > 0.01
