"""Autoresonance capture of nonlinear oscillators under decaying chirped forcing."""

from .averaging import (
    averaged_drift,
    decide,
    example_gamma,
    example_thresholds,
    find_equilibria,
    locked_amplitude,
    stability_verdict,
)
from .chirp import PerturbationSpec, Term, exponents, preset, resonant_energy
from .config import RunConfig, load, preset_config
from .errors import (
    AdmissibilityError,
    ConfigError,
    DegenerateError,
    DomainError,
    EngineRefusal,
    NumericError,
)
from .orbit import default_orbit, from_energy_angle, to_energy_angle
from .potential import PotentialSpec, frequency, kappa_constant, omega_asym, period
from .simulate import build_rhs, classify, contraction_probe, integrate, observables, on_resonance_ic

__version__ = "0.1.0"
