"""Leading-order averaged drift, locked phases and the stability decision table.

Every averaged quantity here is a trigonometric polynomial in the phase
difference theta. For a 2 pi-periodic orbit function ``P`` with Fourier
coefficients ``p_n`` the fast average reduces to

    <P(theta + zeta/kappa) cos(m zeta)>_zeta =  Re(p_{m kappa} e^{i m kappa theta})
    <P(theta + zeta/kappa) sin(m zeta)>_zeta = -Im(p_{m kappa} e^{i m kappa theta})

which is exactly what the trapezoid rule over ``[0, 2 pi kappa]`` returns on the
orbit grid, but can be evaluated and differentiated at any theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateError, EngineRefusal

REGIMES = ("unstable_saddle", "unstable_gammaD", "exp_stable", "poly_stable", "stable", "finite_time_stable")


@dataclass(frozen=True)
class MonomialTerm:
    channel: str
    k: int
    i: int
    j: int
    fourier: tuple
    scaled_degree: int
    deficiency: int
    K_index: int


def max_degree(spec, pot):
    return spec.p + spec.l * (pot.h - 1) + pot.h


def term_index(spec, pot, term, channel):
    """Scaled degree, deficiency and expansion level of one perturbation entry."""
    h = pot.h
    if channel == "g":
        sdeg = term.i + (term.j + 1) * h
    elif channel == "f":
        sdeg = term.i + 2 * h - 1 + term.j * h
    else:
        raise ValueError(f"channel must be 'f' or 'g', got {channel!r}")
    d = max_degree(spec, pot) - sdeg
    if d < 0:
        raise EngineRefusal(f"{channel}-entry {(term.k, term.i, term.j)} exceeds the admissible scaled degree")
    K = 2 * (h - 1) * term.k + 2 * spec.b * d
    return MonomialTerm(channel, term.k, term.i, term.j, term.fourier, sdeg, d, K)


def indexed_terms(spec, pot):
    return [term_index(spec, pot, t, chan) for chan, t in spec.terms()]


# -- trigonometric polynomials in theta -------------------------------------

@dataclass(frozen=True, eq=False)
class TrigPoly:
    """``const + sum_k Re(coef_k e^{i k theta})``."""

    const: float = 0.0
    coefs: dict = field(default_factory=dict)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, self.const)
        for k in sorted(self.coefs):
            out = out + (self.coefs[k] * np.exp(1j * k * theta)).real
        return float(out) if out.ndim == 0 else out

    def derivative(self):
        return TrigPoly(0.0, {k: 1j * k * c for k, c in self.coefs.items()})

    def __add__(self, other):
        coefs = dict(self.coefs)
        for k, c in other.coefs.items():
            coefs[k] = coefs.get(k, 0.0) + c
        return TrigPoly(self.const + other.const, coefs)

    def scale(self, factor):
        return TrigPoly(self.const * factor, {k: c * factor for k, c in self.coefs.items()})

    def amplitude(self):
        return abs(self.const) + sum(abs(c) for c in self.coefs.values())

    def oscillating_amplitude(self):
        return sum(abs(c) for c in self.coefs.values())


def fast_average(samples, fourier, kappa_res):
    """``<P(theta + zeta/kappa) coef(zeta)>`` over ``zeta`` in ``[0, 2 pi kappa]`` as a TrigPoly."""
    n = samples.size
    p = np.fft.rfft(samples) / n
    const = 0.0
    coefs = {}
    for m, c, s in fourier:
        k = m * kappa_res
        if k == 0:
            const += c * p[0].real
            continue
        if k >= n // 2:
            raise EngineRefusal(f"harmonic {k} is not resolved by an orbit grid of {n} points")
        # Re(p e^{ik th}) c - Im(p e^{ik th}) s = Re((c + i s) p e^{ik th})
        coefs[k] = coefs.get(k, 0.0) + (c + 1j * s) * p[k]
    return TrigPoly(const, coefs)


def trapezoid_average(samples, fourier, kappa_res, theta):
    """Direct trapezoid evaluation of the fast average at one theta (test oracle)."""
    n = samples.size
    nodes = n * kappa_res
    zeta = 2.0 * math.pi * kappa_res * np.arange(nodes) / nodes
    arg = theta + zeta / kappa_res
    phi_grid = 2.0 * math.pi * np.arange(n) / n
    P = _periodic_interp(samples, phi_grid, arg)
    coef = np.zeros_like(zeta)
    for m, c, s in fourier:
        coef += c * np.cos(m * zeta) + s * np.sin(m * zeta)
    return float(np.mean(P * coef))


def _periodic_interp(samples, grid, x):
    # trigonometric interpolation through the FFT (exact for band-limited data)
    n = samples.size
    c = np.fft.rfft(samples) / n
    out = np.full(np.shape(x), c[0].real)
    for m in range(1, c.size - (1 if n % 2 == 0 else 0)):
        out = out + 2.0 * (c[m] * np.exp(1j * m * x)).real
    return out


# -- averaged drift ----------------------------------------------------------

def _check_applicability(spec, pot, terms, setup, L):
    """Refuse when orbit corrections or sub-leading potential terms reach level L."""
    h = pot.h
    sub = [i2 for i2 in range(1, 2 * h) if pot.coeff(2 * h - i2) != 0.0]
    if not sub:
        return
    base = [t.K_index for t in terms] + [setup.N - 2 * setup.M]
    reach = min(base) + 2 * spec.b * min(sub)
    if reach <= L:
        raise EngineRefusal(
            f"level {L} receives corrections from the potential coefficient u_{2 * h - min(sub)} "
            f"(first reached at level {reach}); the leading-order engine does not include them"
        )


def _orbit_value(orbit, term, kind):
    X0, Y0 = orbit.X0, orbit.Y0
    h = orbit.h
    if kind == "F":
        if term.channel == "g":
            return X0 ** term.i * Y0 ** (term.j + 1)
        return X0 ** (term.i + 2 * h - 1) * Y0 ** term.j
    if term.channel == "f":
        return 0.5 * orbit.omega0 * X0 ** term.i * Y0 ** (term.j + 1)
    return -(orbit.omega0 / (2.0 * h)) * X0 ** (term.i + 1) * Y0 ** term.j


def _nu_pow(nu, e):
    return float(nu) ** float(e)


def level_drift(spec, pot, orbit, setup, K, terms=None):
    """Zeroth-order (r = 0) drift at level K, and whether the drag enters there."""
    h = pot.h
    if terms is None:
        terms = indexed_terms(spec, pot)
    c = setup.c_kappa
    N, M = setup.N, setup.M
    pexp = spec.p - 1 + (spec.l - 1) * (h - 1)
    total = TrigPoly()
    for t in terms:
        if t.K_index != K:
            continue
        avg = fast_average(_orbit_value(orbit, t, "F"), t.fourier, setup.kappa_res)
        total = total + avg.scale(c ** t.deficiency)
    total = total.scale(_nu_pow(setup.nu, Fraction(-(K + M), N)) / (2.0 * h) * c ** (-pexp))
    drag = K == N - 2 * M
    if drag:
        total = total + TrigPoly(-_nu_pow(setup.nu, Fraction(-(N - M), N)) * spec.b / ((h - 1) * spec.q))
    return total, drag


def angular_coefficient(spec, pot, orbit, setup, terms=None):
    """Omega_M at r = 0: fast average of the angle perturbation from level-0 entries."""
    h = pot.h
    if terms is None:
        terms = indexed_terms(spec, pot)
    c = setup.c_kappa
    pexp = spec.p - 1 + (spec.l - 1) * (h - 1)
    total = TrigPoly()
    for t in terms:
        if t.K_index != 0:
            continue
        avg = fast_average(_orbit_value(orbit, t, "G"), t.fourier, setup.kappa_res)
        total = total + avg.scale(c ** t.deficiency)
    return total.scale(_nu_pow(setup.nu, Fraction(-2 * setup.M, setup.N)) * c ** (-pexp))


def leading_order(spec, pot, orbit, setup, terms=None):
    """Smallest level at which the averaged drift is not identically zero."""
    if terms is None:
        terms = indexed_terms(spec, pot)
    N, M = setup.N, setup.M
    bound = min(N - M, 2 * M - 1)
    candidates = sorted({t.K_index for t in terms} | {N - 2 * M})
    scale = 1.0 + sum(abs(c) + abs(s) for t in terms for _, c, s in t.fourier)
    for K in candidates:
        if K > bound:
            break
        poly, _ = level_drift(spec, pot, orbit, setup, K, terms)
        if poly.amplitude() > 1e-12 * scale:
            return K
    raise DegenerateError(f"averaged drift vanishes at every level up to {bound}")


@dataclass(frozen=True, eq=False)
class AveragedDrift:
    L: int
    theta_grid: np.ndarray
    Lambda_samples: np.ndarray
    Omega_samples: np.ndarray
    drag_included: bool
    equilibria: tuple = ()
    Lambda: TrigPoly = field(default_factory=TrigPoly, repr=False)
    Omega: TrigPoly = field(default_factory=TrigPoly, repr=False)

    @property
    def stable_equilibrium(self):
        """The locked phase with the most negative slope, or None."""
        stable = [e for e in self.equilibria if e[1] < 0]
        return min(stable, key=lambda e: e[1]) if stable else None

    def to_csv_rows(self):
        return np.column_stack([self.theta_grid, self.Lambda_samples, self.Omega_samples])


def averaged_drift(spec, pot, orbit, setup, n_theta=1024):
    """Lambda_L(theta) and Omega_M(theta) at r = 0, with equilibria filled in."""
    if orbit.h != pot.h:
        raise EngineRefusal("orbit and potential have different h")
    terms = indexed_terms(spec, pot)
    L = leading_order(spec, pot, orbit, setup, terms)
    _check_applicability(spec, pot, terms, setup, L)
    lam, drag = level_drift(spec, pot, orbit, setup, L, terms)
    om = angular_coefficient(spec, pot, orbit, setup, terms)
    grid = 2.0 * math.pi * np.arange(n_theta) / n_theta
    drift = AveragedDrift(L, grid, lam(grid), om(grid), drag, (), lam, om)
    return find_equilibria(drift)


def find_equilibria(drift, tol=1e-12):
    """Zeros of Lambda on [0, 2 pi) by sign-change scan and bracketed refinement."""
    lam = drift.Lambda
    dlam = lam.derivative()
    if not lam.coefs:
        return replace(drift, equilibria=())
    n = max(drift.theta_grid.size, 16 * max(lam.coefs))
    grid = 2.0 * math.pi * np.arange(n + 1) / n
    vals = lam(grid)
    scale = lam.amplitude()
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            root = a
        elif fa * fb < 0.0:
            root = brentq(lam, a, b, xtol=tol, rtol=8.9e-16)
        else:
            continue
        slope = dlam(root)
        if abs(slope) < 1e-8 * scale:
            raise DegenerateError(f"equilibrium at theta = {root:.6f} is not simple (slope {slope:.3e})")
        roots.append((float(root % (2.0 * math.pi)), float(slope)))
    roots.sort()
    return replace(drift, equilibria=tuple(roots))


def pending_drag(drift, setup, t):
    """Drag entering above the leading level, weighted to its size at time ``t``.

    Returns 0 when the drag is already part of the leading drift (or absent).
    The value is what must be added to ``Lambda_L`` to get the locked phase
    one order further.
    """
    N, M = setup.N, setup.M
    K_d = N - 2 * M
    L = drift.L
    if drift.drag_included or K_d <= L:
        return 0.0
    tau = float(t) ** float(setup.nu) / float(setup.nu)
    return tau ** (-(K_d - L) / N) * _nu_pow(setup.nu, Fraction(-(N - M), N)) * setup.drag


def q00(setup):
    """Leading coefficient of the linear angle equation, ``dtheta/dtau ~ Q r``."""
    h = setup.h
    return _nu_pow(setup.nu, Fraction(-setup.M, setup.N)) * (h - 1) * setup.omega0 * setup.c_kappa ** (-(h - 1))


def locked_amplitude(drift, setup, equilibrium=None):
    """``rho0 = -Omega_M(phi0) / Q`` at the stable locked phase."""
    eq = equilibrium if equilibrium is not None else drift.stable_equilibrium
    if eq is None:
        raise DegenerateError("no equilibrium with negative slope")
    return -drift.Omega(eq[0]) / q00(setup) + 0.0


# -- stability ---------------------------------------------------------------

@dataclass(frozen=True)
class StabilityVerdict:
    gamma_D: float
    D: int
    regime: str
    predicted_contraction_exponent: float | None = None
    stretch_power: float | None = None


def decide(lambda_L, gamma_D, M, D, N, L):
    """Regime from the signs of ``lambda_L``, ``gamma_D`` and the level bookkeeping."""
    if lambda_L == 0 or not math.isfinite(lambda_L):
        raise DegenerateError("lambda_L must be nonzero")
    if lambda_L > 0:
        return "unstable_saddle"
    if gamma_D == 0 or not math.isfinite(gamma_D):
        raise DegenerateError("gamma_D must be nonzero")
    if gamma_D > 0:
        return "unstable_gammaD"
    if M + D < N:
        return "exp_stable"
    if M + D == N:
        return "poly_stable" if gamma_D + L / N < 0 else "finite_time_stable"
    return "stable" if L == 0 else "finite_time_stable"


def stability_verdict(drift, setup, gamma_D, D, equilibrium=None):
    eq = equilibrium if equilibrium is not None else drift.stable_equilibrium
    if eq is None:
        if not drift.equilibria:
            raise DegenerateError("no equilibrium to classify")
        eq = drift.equilibria[0]
    M, N, L = setup.M, setup.N, drift.L
    regime = decide(eq[1], gamma_D, M, D, N, L)
    exponent = None
    stretch = None
    if regime == "poly_stable":
        exponent = L / N + gamma_D
    elif regime == "exp_stable":
        # W0 ~ exp(-rate tau^(1 - (M+D)/N)) with rate |gamma_D| N / (N - M - D)
        stretch = 1.0 - (M + D) / N
        exponent = gamma_D * N / (N - M - D)
    return StabilityVerdict(float(gamma_D), int(D), regime, exponent, stretch)


# -- closed forms for the built-in examples ----------------------------------

@dataclass(frozen=True)
class ExampleThresholds:
    d: float
    B_crit: float
    phi0_branches: tuple
    extras: dict = field(default_factory=dict)


def _angle_avg(v):
    return float(np.mean(v))


def example_thresholds(example, orbit, setup, B=None, C=1.0):
    """Threshold constant, critical amplitude and locked-phase branches.

    ``phi0_branches`` lists the stable branch for positive and for negative
    amplitude when ``|B|`` is above threshold; entries are None otherwise.
    """
    kappa = orbit.kappa
    s = setup.s
    k = setup.kappa_res
    X0, Y0 = orbit.X0, orbit.Y0
    zeta = orbit.grid
    extras = {}
    if example == 1:
        d = 27.0 * math.pi**4 * k**3 / (2.0 * math.sqrt(2.0) * kappa**4 * math.cosh(k * math.pi / 2))
        if k % 2 == 0:
            d = 0.0
        crit = s * s
        B_crit = math.inf if d == 0.0 else crit / d

        def branches(Bv):
            r = crit / (Bv * d)
            if abs(r) > 1:
                return None
            base = -math.asin(r) if Bv > 0 else math.pi + math.asin(r)
            return (base / k) % (2.0 * math.pi / k)
    elif example == 2:
        a11 = _angle_avg(X0 * Y0 * np.sin(2 * zeta))
        d = -9.0 * math.pi * a11 / (4.0 * kappa)
        extras["a11"] = a11
        crit = s
        B_crit = crit / d

        def branches(Bv):
            r = crit / (Bv * d)
            if abs(r) > 1:
                return None
            base = -0.5 * math.asin(r) if Bv > 0 else 0.5 * math.pi + 0.5 * math.asin(r)
            return base % math.pi
    elif example == 3:
        a31 = _angle_avg(X0**3 * Y0 * np.sin(2 * zeta))
        v22 = _angle_avg(X0**2 * Y0**2)
        d = -3.0 * math.pi * a31 / (kappa * v22)
        extras.update(a31=a31, v22=v22)
        crit = s * C
        B_crit = crit / d

        def branches(Bv):
            r = crit / (Bv * d)
            if abs(r) > 1:
                return None
            base = -0.5 * math.asin(r) if Bv > 0 else 0.5 * math.pi + 0.5 * math.asin(r)
            return base % math.pi
    else:
        raise ValueError(f"example must be 1, 2 or 3, got {example!r}")
    phi0 = ()
    if B is not None and B != 0 and math.isfinite(B_crit):
        phi0 = (branches(B),)
    return ExampleThresholds(d, B_crit, phi0, extras)


def example_gamma(example, orbit, setup, C=1.0):
    """Closed-form ``(gamma_D, D)`` for the built-in examples."""
    if example in (1, 2):
        return -0.25, 4
    if example == 3:
        v22 = _angle_avg(orbit.X0**2 * orbit.Y0**2)
        g = -5.0 * C * v22 * float(setup.nu) ** -0.75 * (orbit.kappa * setup.s / (6.0 * math.pi)) ** 2
        return g, 4
    raise ValueError(f"example must be 1, 2 or 3, got {example!r}")
