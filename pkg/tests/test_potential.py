import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from autores.errors import DomainError
from autores.orbit import default_orbit
from autores.potential import (
    PotentialSpec,
    critical_points,
    energy_threshold,
    eval_force,
    eval_potential,
    frequency,
    kappa_constant,
    lower_threshold,
    omega_asym,
    period,
    time_from_right_turning_point,
    turning_points,
)

DUFFING = (0.0, 0.0, -0.5, 0.0, 0.25)


def test_kappa_matches_elliptic_closed_form():
    assert kappa_constant(2) == pytest.approx(oracles.kappa_h2(), rel=1e-12)
    assert kappa_constant(2) == pytest.approx(5.24412, abs=5e-6)


def test_kappa_higher_h_against_beta_function():
    # integral_{-1}^{1} ds / sqrt(1 - s^2h) = B(1/2h, 1/2) / h
    for h in (3, 4):
        beta = math.gamma(1 / (2 * h)) * math.gamma(0.5) / math.gamma(1 / (2 * h) + 0.5)
        ref = math.sqrt(2) * (2 * h) ** (1 / (2 * h)) * beta / h
        assert kappa_constant(h) == pytest.approx(ref, rel=1e-12)


def test_rejects_bad_degree():
    with pytest.raises(DomainError):
        PotentialSpec(1)
    with pytest.raises(DomainError):
        PotentialSpec(2, (1.0, 2.0))
    with pytest.raises(DomainError):
        kappa_constant(1)


def test_duffing_thresholds(duffing):
    assert critical_points(duffing) == pytest.approx((-1.0, 0.0, 1.0), abs=1e-14)
    e0, e1 = energy_threshold(duffing)
    assert e0 == pytest.approx(1e-9, abs=1e-12)
    assert e1 >= e0
    # the frequency is increasing from E1 on
    grid = np.geomspace(e1, 1e3, 40)
    om = [frequency(duffing, e) for e in grid]
    assert np.all(np.diff(om) > 0)


def test_lower_threshold_skips_inner_wells():
    # a tilted double well: the highest critical level sits above zero
    pot = PotentialSpec(2, (0.0, -1.0, 0.3))
    level = max(eval_potential(pot, c) for c in critical_points(pot))
    assert lower_threshold(pot) > max(level, 0.0)
    with pytest.raises(DomainError):
        turning_points(pot, lower_threshold(pot) * 0.5)


@pytest.mark.parametrize("E", [0.05, 1.0, 10.0, 1e3, 1e6])
def test_period_against_return_time(duffing, E):
    assert period(duffing, E) == pytest.approx(oracles.period_by_return(DUFFING, E), rel=1e-10)


def test_period_just_above_separatrix(duffing):
    E = 1e-6
    assert period(duffing, E) == pytest.approx(oracles.period_by_return(DUFFING, E), rel=1e-8)


@pytest.mark.parametrize("frac", [-0.9, -0.3, 0.0, 0.4, 0.95])
def test_time_of_flight(duffing, frac):
    E = 10.0
    xm, xp = turning_points(duffing, E)
    x = xp * frac if frac >= 0 else -xm * frac
    assert time_from_right_turning_point(duffing, E, x) == pytest.approx(
        oracles.time_of_flight(DUFFING, E, x), rel=1e-10)


def test_turning_points_are_roots(duffing):
    for E in (0.01, 3.0, 1e5):
        xm, xp = turning_points(duffing, E)
        assert xm < 0 < xp
        for x in (xm, xp):
            assert eval_potential(duffing, x) == pytest.approx(E, rel=1e-13, abs=1e-15)


def test_force_is_derivative(duffing):
    x = np.linspace(-2, 2, 9)
    h = 1e-6
    fd = (eval_potential(duffing, x + h) - eval_potential(duffing, x - h)) / (2 * h)
    assert np.allclose(eval_force(duffing, x), fd, atol=1e-8)


def test_frequency_asymptotics_duffing(duffing):
    freq = omega_asym(duffing, default_orbit(2))
    assert freq.omega0 == pytest.approx(2 * math.pi / oracles.kappa_h2(), rel=1e-12)
    assert freq.omega0 == pytest.approx(1.19814023, abs=1e-8)
    assert freq.omega2 == pytest.approx(-0.13687, abs=1e-5)
    # omega(E) E^(-1/4) - omega0 ~ omega2 E^(-1/2)
    for E in (1e4, 1e6):
        gap = frequency(duffing, E) * E**-0.25 - freq.omega0
        assert gap * math.sqrt(E) == pytest.approx(freq.omega2, rel=2e-2)


@settings(max_examples=25, deadline=None)
@given(u2=st.floats(-1.0, 1.0), u3=st.floats(-0.5, 0.5))
def test_frequency_asymptotics_quadrature(u2, u3):
    pot = PotentialSpec(2, (0.0, u2, u3))
    freq = omega_asym(pot, default_orbit(2))
    E = 1e8
    pred = E**0.25 * (freq.omega0 + freq.omega2 * E**-0.5)
    assert frequency(pot, E) == pytest.approx(pred, rel=2e-7)


@settings(max_examples=40, deadline=None)
@given(E=st.floats(1e-3, 1e6))
def test_period_scaling_monomial(E):
    # x^4/4 has T(E) = kappa E^(-1/4) exactly
    pot = PotentialSpec.monomial(2)
    assert period(pot, E) == pytest.approx(kappa_constant(2) * E**-0.25, rel=1e-11)
