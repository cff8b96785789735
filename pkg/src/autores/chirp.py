"""Decaying chirped perturbations and the resonance scaling they induce."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from . import _kernel
from .errors import AdmissibilityError, ConfigError, ResonanceOnsetError
from .potential import PotentialSpec, energy_threshold, frequency

PHASE_HORIZON = 1e6


@dataclass(frozen=True)
class Term:
    """One entry ``(k, i, j)`` of a perturbation table with its Fourier series.

    ``fourier`` holds ``(m, cos_coef, sin_coef)`` triples with integer ``m >= 0``.
    """

    k: int
    i: int
    j: int
    fourier: tuple[tuple[int, float, float], ...]

    def __post_init__(self):
        for name in ("k", "i", "j"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 0:
                raise ConfigError(f"must be a non-negative integer, got {v!r}", field=name)
            object.__setattr__(self, name, int(v))
        rows = []
        for entry in self.fourier:
            if len(entry) != 3:
                raise ConfigError("each Fourier entry is [m, cos_coef, sin_coef]", field="fourier")
            m, c, s = entry
            if isinstance(m, bool) or int(m) != m or m < 0:
                raise ConfigError(f"harmonic must be a non-negative integer, got {m!r}", field="fourier")
            c, s = float(c), float(s)
            if not (math.isfinite(c) and math.isfinite(s)):
                raise ConfigError("Fourier coefficients must be finite", field="fourier")
            rows.append((int(m), c, 0.0 if int(m) == 0 else s))
        object.__setattr__(self, "fourier", tuple(rows))

    def to_dict(self):
        return {"k": self.k, "i": self.i, "j": self.j, "fourier": [list(r) for r in self.fourier]}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["k"], d["i"], d["j"], tuple(tuple(r) for r in d["fourier"]))
        except KeyError as exc:
            raise ConfigError(f"missing key {exc.args[0]!r}", field="term") from None

    def is_zero(self):
        return all(c == 0.0 and s == 0.0 for _, c, s in self.fourier)


@dataclass(frozen=True)
class PerturbationSpec:
    """``t^(-a/q) sum_k t^(-k/q) sum_{i,j} coef_{k,i,j}(S) x^i y^j`` in each equation.

    ``f`` perturbs dx/dt and ``g`` perturbs dy/dt; ``S(t) = s t^(1+b/q)``.
    """

    a: int
    b: int
    q: int
    s: float
    l: int
    p: int
    f: tuple[Term, ...] = ()
    g: tuple[Term, ...] = ()
    k_max: int | None = None

    def __post_init__(self):
        for name in ("a", "b", "q", "l", "p"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise ConfigError(f"must be an integer, got {v!r}", field=name)
            object.__setattr__(self, name, int(v))
        if not 1 <= self.a <= self.q:
            raise ConfigError(f"need 1 <= a <= q, got a={self.a}, q={self.q}", field="a")
        if not 1 <= self.b <= self.q:
            raise ConfigError(f"need 1 <= b <= q, got b={self.b}, q={self.q}", field="b")
        if not (isinstance(self.s, (int, float)) and math.isfinite(self.s) and self.s > 0):
            raise ConfigError(f"chirp rate must be a positive real, got {self.s!r}", field="s")
        object.__setattr__(self, "s", float(self.s))
        if not 0 <= self.l <= self.p:
            raise ConfigError(f"need 0 <= l <= p, got l={self.l}, p={self.p}", field="l")
        f = tuple(t if isinstance(t, Term) else Term.from_dict(t) for t in self.f)
        g = tuple(t if isinstance(t, Term) else Term.from_dict(t) for t in self.g)
        for table, terms, jmax in (("f", f, self.l - 1), ("g", g, self.l)):
            seen = set()
            for t in terms:
                key = (t.k, t.i, t.j)
                if key in seen:
                    raise ConfigError(f"duplicate entry (k, i, j) = {key}", field=table)
                seen.add(key)
                if t.i + t.j > self.p:
                    raise ConfigError(f"entry {key} has i + j > p = {self.p}", field=table)
                if t.j > jmax:
                    raise ConfigError(f"entry {key} has j > {jmax}", field=table)
        if self.k_max is not None:
            kept_f = tuple(t for t in f if t.k <= self.k_max)
            kept_g = tuple(t for t in g if t.k <= self.k_max)
            if len(kept_f) + len(kept_g) < len(f) + len(g):
                warnings.warn(f"perturbation truncated to k <= {self.k_max}", stacklevel=2)
            f, g = kept_f, kept_g
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    def terms(self):
        """``(channel, term)`` pairs, channel ``"f"`` or ``"g"``, in a fixed order."""
        return [("f", t) for t in self.f] + [("g", t) for t in self.g]

    def term_table(self):
        """Flat rows ``(channel, k, i, j, m, cos, sin)`` for the compiled vector field."""
        rows = []
        for chan, t in self.terms():
            for m, c, s in t.fourier:
                if c != 0.0 or s != 0.0:
                    rows.append((0.0 if chan == "f" else 1.0, t.k, t.i, t.j, m, c, s))
        return np.array(rows, dtype=float).reshape(-1, 7)

    def chirp_array(self):
        return np.array([self.s, self.a, self.b, self.q], dtype=float)

    def to_dict(self):
        d = {
            "a": self.a, "b": self.b, "q": self.q, "s": self.s, "l": self.l, "p": self.p,
            "f": [t.to_dict() for t in self.f],
            "g": [t.to_dict() for t in self.g],
        }
        if self.k_max is not None:
            d["k_max"] = self.k_max
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                d["a"], d["b"], d["q"], d["s"], d["l"], d["p"],
                tuple(Term.from_dict(t) for t in d.get("f", ())),
                tuple(Term.from_dict(t) for t in d.get("g", ())),
                d.get("k_max"),
            )
        except KeyError as exc:
            raise ConfigError(f"missing key {exc.args[0]!r}", field="perturbation") from None


PRESET_DEFAULTS = {
    "example1": {"B": 2.0, "s": 0.75},
    "example2": {"B": 2.0, "s": 1.0},
    "example3": {"B": 1.2, "s": 1.0, "C": 1.0},
}


def preset(name, **params):
    """Built-in examples on the Duffing potential; returns ``(PotentialSpec, PerturbationSpec)``.

    example1: x'' - x + x^3 = B t^(-1/3) cos(s t^(4/3))
    example2: x'' - (1 + B t^(-2/3) cos S) x + x^3 = 0
    example3: x'' - x + (1 - B t^(-1) cos S) x^3 + C t^(-4/3) x^2 x' = 0
    """
    if name not in PRESET_DEFAULTS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESET_DEFAULTS)}", field="preset")
    unknown = set(params) - set(PRESET_DEFAULTS[name])
    if unknown:
        raise ConfigError(f"preset {name} has no parameter(s) {sorted(unknown)}", field="preset")
    v = {**PRESET_DEFAULTS[name], **params}
    B, s = float(v["B"]), float(v["s"])
    pot = PotentialSpec.duffing()
    if name == "example1":
        pert = PerturbationSpec(1, 1, 3, s, 0, 0, g=(Term(0, 0, 0, ((1, B, 0.0),)),))
    elif name == "example2":
        pert = PerturbationSpec(2, 1, 3, s, 0, 1, g=(Term(0, 1, 0, ((1, B, 0.0),)),))
    else:
        C = float(v["C"])
        if C <= 0:
            raise ConfigError(f"damping C must be positive, got {C}", field="C")
        pert = PerturbationSpec(
            3, 1, 3, s, 1, 3,
            g=(Term(0, 3, 0, ((1, B, 0.0),)), Term(1, 2, 1, ((0, -C, 0.0),))),
        )
    return pot, pert


# -- admissibility and exponents -------------------------------------------

def sigma_of(spec, pot):
    h = pot.h
    return Fraction(spec.b, spec.q) * (spec.l - 1 + Fraction(spec.p - 1, h - 1)) - Fraction(spec.a, spec.q)


def validate(spec, pot):
    """Exact ``sigma``; rejects unless ``-1 <= sigma < b/q``."""
    if spec.p > 2 * pot.h - 1:
        raise ConfigError(f"p = {spec.p} exceeds 2h-1 = {2 * pot.h - 1}", field="p")
    sigma = sigma_of(spec, pot)
    upper = Fraction(spec.b, spec.q)
    if sigma < -1:
        raise AdmissibilityError(f"sigma = {sigma} is below -1", sigma, Fraction(-1))
    if sigma >= upper:
        raise AdmissibilityError(f"sigma = {sigma} is not below b/q = {upper}", sigma, upper)
    return sigma


@dataclass(frozen=True)
class ResonanceSetup:
    kappa_res: int
    h: int
    a: int
    b: int
    q: int
    s: float
    sigma: Fraction
    mu: Fraction
    nu: Fraction
    M: int
    N: int
    theta_rate: float
    omega0: float
    c_kappa: float
    drag: float
    z2: float

    @property
    def growth_exponent(self):
        """Exponent of ``I*(t) ~ c^(-2h) t^(2hb/((h-1)q))``."""
        return 2.0 * self.h * self.b / ((self.h - 1) * self.q)

    @property
    def growth_prefactor(self):
        return self.c_kappa ** (-2 * self.h)

    def chirp_rate(self, t):
        return self.theta_rate * t ** (self.b / self.q)

    def onset_time(self, omega_e1):
        """Smallest ``t`` with ``S'(t)/kappa_res >= omega(E1)``."""
        return (self.kappa_res * omega_e1 / self.theta_rate) ** (self.q / self.b)


def exponents(spec, pot, kappa_res, freq=None):
    """Resonance scaling data for resonance order ``kappa_res``.

    ``freq`` (a FrequencyAsymptotics) supplies omega2 for ``z2``; when omitted
    it is computed from the shared normalized orbit.
    """
    if isinstance(kappa_res, bool) or int(kappa_res) != kappa_res or kappa_res < 1:
        raise ConfigError(f"resonance order must be a positive integer, got {kappa_res!r}", field="kappa")
    kappa_res = int(kappa_res)
    sigma = validate(spec, pot)
    h = pot.h
    bq = Fraction(spec.b, spec.q)
    mu = (bq - sigma) / 2
    nu = 1 + 2 * mu + sigma
    M = 2 * mu * spec.q * (h - 1)
    N = 2 * nu * spec.q * (h - 1)
    if M.denominator != 1 or N.denominator != 1:
        raise ArithmeticError(f"non-integer exponents M = {M}, N = {N} (sigma = {sigma})")
    M, N = int(M), int(N)
    if freq is None:
        from .orbit import default_orbit
        from .potential import omega_asym

        freq = omega_asym(pot, default_orbit(h))
    omega0 = freq.omega0
    theta_rate = spec.s * (1.0 + spec.b / spec.q)
    c = (omega0 * kappa_res / theta_rate) ** (1.0 / (h - 1))
    z2 = -freq.omega2 * c * c / ((h - 1) * omega0)
    drag = -spec.b / ((h - 1) * spec.q)
    return ResonanceSetup(
        kappa_res, h, spec.a, spec.b, spec.q, spec.s, sigma, mu, nu, M, N,
        theta_rate, omega0, c, drag, z2,
    )


def z_coefficients(setup, freq):
    """``z(t) = c t^(-b/((h-1)q)) I*(t)^(1/2h) = z0 + z1 t^(-beta) + z2 t^(-2 beta) + ...``"""
    c = setup.c_kappa
    return 1.0, 0.0, -freq.omega2 * c * c / ((setup.h - 1) * freq.omega0)


# -- chirp phase -------------------------------------------------------------

@dataclass(frozen=True)
class ChirpPhase:
    S: float
    S_reduced: float
    S_rate: float
    beyond_horizon: bool = False


def chirp_phase(spec, t):
    """``S = s t^(1+b/q)``, its value modulo 2 pi, and ``S'(t)``.

    The reduction keeps the product ``s t^(1+b/q)`` as a double-double pair, so
    ``cos S`` stays accurate to ~1e-10 absolute up to ``t = 1e6``.
    """
    if t < 0:
        raise ConfigError(f"chirp phase needs t >= 0, got {t!r}", field="t")
    if t == 0:
        return ChirpPhase(0.0, 0.0, 0.0)
    hi, lo, red = _kernel.chirp_phase_dd(float(t), spec.s, float(spec.b), float(spec.q))
    rate = spec.s * (1.0 + spec.b / spec.q) * t ** (spec.b / spec.q)
    return ChirpPhase(hi + lo, red, rate, t > PHASE_HORIZON)


# -- resonant energy ---------------------------------------------------------

def onset_time(setup, pot):
    _, e1 = energy_threshold(pot)
    return setup.onset_time(frequency(pot, e1))


def resonant_energy(setup, pot, t):
    """Energy ``I*`` with ``omega(I*) = S'(t) / kappa_res``."""
    e0, e1 = energy_threshold(pot)
    target = setup.chirp_rate(t) / setup.kappa_res
    w1 = frequency(pot, e1)
    if target < w1:
        t1 = setup.onset_time(w1)
        raise ResonanceOnsetError(f"t = {t!r} precedes the resonance onset t1 = {t1!r}", t1)
    h = pot.h
    slope = (h - 1) / (2.0 * h)
    # asymptotic guess, then secant on log(omega) vs log(E)
    guess = max(e1, (target / setup.omega0) ** (1.0 / slope))
    x0 = math.log(guess)
    f0 = math.log(frequency(pot, guess)) - math.log(target)
    x1 = x0 - f0 / slope
    if x1 < math.log(e1):
        x1 = 0.5 * (x0 + math.log(e1))
    for _ in range(30):
        e = math.exp(x1)
        f1 = math.log(frequency(pot, e)) - math.log(target)
        if abs(f1) < 2e-13 or f1 == f0:
            break
        x0, x1, f0 = x1, x1 - f1 * (x1 - x0) / (f1 - f0), f1
        if x1 < math.log(e1):
            break
    e = math.exp(x1)
    if e >= e1 and abs(frequency(pot, e) - target) <= 1e-11 * target:
        return e
    # fall back to bracketing
    hi = max(2.0 * e1, guess)
    while frequency(pot, hi) < target:
        hi *= 2.0
    return brentq(lambda E: frequency(pot, E) - target, e1, hi, xtol=1e-300, rtol=4e-15, maxiter=200)
