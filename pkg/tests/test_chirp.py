import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from autores.chirp import (
    PerturbationSpec,
    Term,
    chirp_phase,
    exponents,
    onset_time,
    preset,
    resonant_energy,
    sigma_of,
    validate,
)
from autores.errors import AdmissibilityError, ConfigError, ResonanceOnsetError
from autores.potential import PotentialSpec, frequency


@pytest.mark.parametrize(
    "name, sigma, mu, nu, M, N",
    [
        ("example1", Fraction(-1), Fraction(2, 3), Fraction(4, 3), 4, 8),
        ("example2", Fraction(-1), Fraction(2, 3), Fraction(4, 3), 4, 8),
        ("example3", Fraction(-1, 3), Fraction(1, 3), Fraction(4, 3), 2, 8),
    ],
)
def test_preset_exponents(name, sigma, mu, nu, M, N):
    pot, pert = preset(name)
    setup = exponents(pert, pot, 1 if name == "example1" else 2)
    assert (setup.sigma, setup.mu, setup.nu, setup.M, setup.N) == (sigma, mu, nu, M, N)
    assert setup.growth_exponent == pytest.approx(4 / 3)
    assert setup.drag == pytest.approx(-1 / 3)


def test_growth_prefactors():
    pot, pert = preset("example1", s=0.75)
    assert exponents(pert, pot, 1).growth_prefactor == pytest.approx(0.485, abs=5e-4)
    pot, pert = preset("example3")
    assert exponents(pert, pot, 2).growth_prefactor == pytest.approx(0.0959, abs=5e-4)


def test_admissibility_window():
    pot = PotentialSpec.duffing()
    # sigma = b/q (l - 1 + (p-1)/(h-1)) - a/q must sit in [-1, b/q)
    ok = PerturbationSpec(1, 1, 3, 1.0, 0, 0, g=(Term(0, 0, 0, ((1, 1.0, 0.0),)),))
    assert validate(ok, pot) == -1
    with pytest.raises(AdmissibilityError):
        validate(PerturbationSpec(1, 3, 3, 1.0, 3, 3), pot)
    with pytest.raises(ConfigError):
        validate(PerturbationSpec(1, 1, 3, 1.0, 0, 4), pot)


@settings(max_examples=200, deadline=None)
@given(a=st.integers(1, 6), b=st.integers(1, 6), q=st.integers(1, 6), l=st.integers(0, 3), p=st.integers(0, 3))
def test_exponents_invariants(a, b, q, l, p):
    if not (a <= q and b <= q and l <= p):
        return
    pot = PotentialSpec.duffing()
    pert = PerturbationSpec(a, b, q, 1.0, l, p)
    sigma = sigma_of(pert, pot)
    if not (-1 <= sigma < Fraction(b, q)):
        with pytest.raises(AdmissibilityError):
            exponents(pert, pot, 1)
        return
    try:
        setup = exponents(pert, pot, 1)
    except ArithmeticError:
        return
    assert setup.mu > 0
    assert setup.nu == 1 + 2 * setup.mu + setup.sigma
    assert 0 < setup.M < setup.N


def test_term_validation():
    with pytest.raises(ConfigError):
        Term(-1, 0, 0, ())
    with pytest.raises(ConfigError):
        Term(0, 0, 0, ((1, float("nan"), 0.0),))
    with pytest.raises(ConfigError):
        PerturbationSpec(1, 1, 3, 1.0, 0, 0, g=(Term(0, 1, 0, ()),))
    with pytest.raises(ConfigError):
        PerturbationSpec(1, 1, 3, -1.0, 0, 0)
    spec = PerturbationSpec(2, 1, 3, 1.0, 0, 1, g=(Term(0, 1, 0, ((1, 2.0, 0.0),)),))
    assert PerturbationSpec.from_dict(spec.to_dict()) == spec


def test_k_max_truncation_warns():
    g = (Term(0, 0, 0, ((1, 1.0, 0.0),)), Term(2, 0, 0, ((1, 1.0, 0.0),)))
    with pytest.warns(UserWarning):
        spec = PerturbationSpec(1, 1, 3, 1.0, 0, 0, g=g, k_max=1)
    assert len(spec.g) == 1


def test_preset_rejects_unknown():
    with pytest.raises(ConfigError):
        preset("example4")
    with pytest.raises(ConfigError):
        preset("example1", C=1.0)
    with pytest.raises(ConfigError):
        preset("example3", C=-1.0)


@pytest.mark.parametrize("t", [1.0, 50.0, 1234.5, 1e5, 9.9e5])
def test_chirp_phase_reduction(t):
    cp = chirp_phase(PerturbationSpec(1, 1, 3, 0.75, 0, 0), t)
    ref = oracles.chirp_phase_mod(0.75, t, 4, 3)
    assert abs(math.remainder(cp.S_reduced - ref, 2 * math.pi)) < 1e-10
    assert cp.S_rate == pytest.approx(0.75 * 4 / 3 * t ** (1 / 3))
    assert not cp.beyond_horizon


def test_chirp_phase_domain():
    spec = PerturbationSpec(1, 1, 3, 1.0, 0, 0)
    assert chirp_phase(spec, 0.0).S == 0.0
    assert chirp_phase(spec, 2e6).beyond_horizon
    with pytest.raises(ConfigError):
        chirp_phase(spec, -1.0)


def test_resonant_energy_matches_drive(duffing):
    pot, pert = preset("example1", s=0.75)
    setup = exponents(pert, pot, 1)
    for t in (50.0, 500.0, 5000.0):
        E = resonant_energy(setup, pot, t)
        assert frequency(pot, E) == pytest.approx(setup.chirp_rate(t), rel=1e-11)
        assert E / t ** (4 / 3) == pytest.approx(setup.growth_prefactor, rel=0.1)


def test_onset_error():
    pot, pert = preset("example1", s=0.75)
    setup = exponents(pert, pot, 3)
    t1 = onset_time(setup, pot)
    assert t1 > 0
    with pytest.raises(ResonanceOnsetError) as exc:
        resonant_energy(setup, pot, 0.5 * t1)
    assert exc.value.t1 == pytest.approx(t1)
