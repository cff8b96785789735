"""Polynomial potentials ``U(x) = x^(2h)/(2h) + sum u_i x^i`` and their periods.

The period of the limiting (unperturbed) oscillation is computed by
Gauss-Legendre quadrature after a sine substitution on each half of the
interval between the turning points. The substitution makes the integrand
analytic, so the rule converges geometrically; the difference ``E - U(x)``
is formed through a divided-difference polynomial to avoid cancellation
next to the turning points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, NumericError

E0_REL_MARGIN = 1e-6
E0_ABS_MARGIN = 1e-9


@dataclass(frozen=True)
class PotentialSpec:
    """Degree parameter ``h`` and the lower coefficients ``u_1 .. u_{2h-1}``.

    The leading term ``x^(2h)/(2h)`` is implicit and there is no constant term.
    """

    h: int
    u: tuple[float, ...] = ()

    def __post_init__(self):
        if isinstance(self.h, bool) or int(self.h) != self.h or self.h < 2:
            raise DomainError(f"h must be an integer >= 2, got {self.h!r}")
        object.__setattr__(self, "h", int(self.h))
        u = tuple(float(v) for v in self.u) if self.u else (0.0,) * (2 * self.h - 1)
        if len(u) != 2 * self.h - 1:
            raise DomainError(f"expected {2 * self.h - 1} coefficients u_1..u_{2 * self.h - 1}, got {len(u)}")
        object.__setattr__(self, "u", u)

    @classmethod
    def duffing(cls):
        """The double well ``x^4/4 - x^2/2``."""
        return cls(2, (0.0, -0.5, 0.0))

    @classmethod
    def monomial(cls, h):
        return cls(h)

    def coeffs(self):
        """Power-series coefficients ``c_0 .. c_{2h}`` of U (lowest first)."""
        return np.array((0.0,) + self.u + (1.0 / (2 * self.h),))

    def coeff(self, n):
        """Coefficient of ``x^n``; ``u_{2h} = 1/(2h)`` and zero outside ``1..2h``."""
        if n == 2 * self.h:
            return 1.0 / (2 * self.h)
        if 1 <= n < 2 * self.h:
            return self.u[n - 1]
        return 0.0

    def dcoeffs(self):
        """Coefficients of U'(x), lowest first (length 2h)."""
        c = self.coeffs()
        return c[1:] * np.arange(1, c.size)

    @property
    def is_monomial(self):
        return not any(self.u)

    def to_dict(self):
        return {"h": self.h, "u": list(self.u)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["h"], tuple(d.get("u", ())))


def _polyval(c, x):
    # c lowest-first; Horner.
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x) + c[-1]
    for a in c[-2::-1]:
        out = out * x + a
    return out


def eval_potential(spec, x):
    """U(x), evaluated as a polynomial (scalar or array)."""
    v = _polyval(spec.coeffs(), x)
    return float(v) if np.ndim(v) == 0 else v


def eval_force(spec, x):
    """U'(x)."""
    v = _polyval(spec.dcoeffs(), x)
    return float(v) if np.ndim(v) == 0 else v


def eval_hamiltonian(spec, x, y):
    """H(x, y) = y^2/2 + U(x)."""
    y = np.asarray(y, dtype=float)
    v = 0.5 * y * y + _polyval(spec.coeffs(), x)
    return float(v) if np.ndim(v) == 0 else v


def _divided_difference(spec, a, b):
    """(U(a) - U(b)) / (a - b), computed without subtraction of U values."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = spec.coeffs()
    g = np.ones(np.broadcast(a, b).shape)  # sum_{k<n} a^k b^(n-1-k) for n = 1
    bp = np.ones_like(g)
    total = c[1] * g
    for n in range(2, c.size):
        bp = bp * b
        g = a * g + bp
        total = total + c[n] * g
    return total


@lru_cache(maxsize=None)
def critical_points(spec):
    """Real roots of U'(x), sorted."""
    d = spec.dcoeffs()
    roots = np.roots(d[::-1])
    real = np.sort(roots[np.abs(roots.imag) <= 1e-9 * (1.0 + np.abs(roots.real))].real)
    if real.size == 0:
        raise NumericError("critical-point isolation failed: U' has no real root")
    # polish by Newton on U'
    dd = d[1:] * np.arange(1, d.size)
    polished = []
    for r in real:
        for _ in range(50):
            f = float(_polyval(d, r))
            fp = float(_polyval(dd, r))
            if fp == 0.0:
                break
            step = f / fp
            r -= step
            if abs(step) <= 4e-16 * max(1.0, abs(r)):
                break
        polished.append(r)
    return tuple(polished)


@lru_cache(maxsize=None)
def _critical_level(spec):
    return max(max(eval_potential(spec, c) for c in critical_points(spec)), 0.0)


def lower_threshold(spec):
    """E0: above it every level set of H is one closed curve around the origin."""
    level = _critical_level(spec)
    return level + E0_REL_MARGIN * abs(level) + E0_ABS_MARGIN


@lru_cache(maxsize=None)
def energy_threshold(spec, e_max=1e4, per_decade=8):
    """Return ``(E0, E1)``.

    E0 is the highest critical level of U (never below U(0) = 0) plus a small
    margin. E1 is the first point of a geometric energy grid on ``[E0, e_max]``
    after which the sampled frequency is strictly increasing.
    """
    e0 = lower_threshold(spec)
    scale = max(1.0, abs(e0))
    decades = math.log10(e_max / scale) + 3.0
    grid = e0 + scale * np.logspace(-3.0, math.log10(e_max / scale), int(decades * per_decade) + 1)
    om = np.array([frequency(spec, e) for e in grid])
    increasing = np.diff(om) > 0.0
    bad = np.flatnonzero(~increasing)
    if bad.size == 0:
        return e0, float(grid[0])
    if bad[-1] + 1 >= grid.size - 1:
        raise NumericError("frequency is not increasing at the top of the scanned energy range")
    return e0, float(grid[bad[-1] + 1])


def turning_points(spec, E):
    """Outermost roots ``x_- < 0 < x_+`` of ``U(x) = E``."""
    e0 = lower_threshold(spec)
    if not E > e0:
        raise DomainError(f"energy {E!r} is not above E0 = {e0!r}")
    crit = critical_points(spec)
    return _outer_root(spec, E, crit[0], -1.0), _outer_root(spec, E, crit[-1], 1.0)


def _outer_root(spec, E, start, direction):
    f = lambda x: eval_potential(spec, x) - E
    a = float(start)
    b = a + direction * max(1.0, abs(a))
    while f(b) <= 0.0:
        b = a + 2.0 * (b - a)
    lo, hi = (a, b) if a < b else (b, a)
    root = brentq(f, lo, hi, xtol=1e-300, rtol=8.9e-16, maxiter=400)
    # one Newton polish; brentq stops at bracket resolution
    fp = eval_force(spec, root)
    if fp != 0.0:
        cand = root - f(root) / fp
        if lo <= cand <= hi and abs(f(cand)) <= abs(f(root)):
            root = cand
    return root


@lru_cache(maxsize=8)
def _gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


def _gl(fun, a, b, rtol=1e-14, n0=32, nmax=512):
    """Gauss-Legendre with node doubling until two successive rules agree.

    Falls back to adaptive QUADPACK when the integrand is nearly singular
    (energies just above a separatrix).
    """
    prev = None
    n = n0
    while n <= nmax:
        z, w = _gauss_legendre(n)
        u = 0.5 * (b - a) * z + 0.5 * (b + a)
        val = 0.5 * (b - a) * float(np.dot(w, fun(u)))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        prev = val
        n *= 2
    val, err = quad(lambda v: float(fun(np.array([v]))[0]), a, b, epsabs=0.0, epsrel=1e-12, limit=1000)
    if not err <= 1e-10 * abs(val):
        raise NumericError(f"quadrature did not converge (estimate {val!r}, error {err!r})")
    return val


def _half_integrand(spec, xc, xt):
    """Integrand in u of  sqrt(2) dx / sqrt(E - U(x))  over x from xc to turning point xt.

    ``x = xc + (xt - xc) sin u``; with ``xt - x = L (1 - sin u)`` the square-root
    singularity cancels against ``cos u``.
    """
    L = abs(xt - xc)
    sgn = 1.0 if xt > xc else -1.0

    def fun(u):
        s = np.sin(u)
        x = xc + sgn * L * s
        d = np.abs(_divided_difference(spec, xt, x))
        return math.sqrt(2.0 * L) * np.sqrt(1.0 + s) / np.sqrt(d)

    return fun


def _halves(spec, E):
    xm, xp = turning_points(spec, E)
    xc = 0.5 * (xm + xp)
    return xm, xp, xc, _half_integrand(spec, xc, xp), _half_integrand(spec, xc, xm)


@lru_cache(maxsize=4096)
def period(spec, E):
    """T(E) = integral of sqrt(2) dx / sqrt(E - U(x)) between the turning points."""
    xm, xp, xc, right, left = _halves(spec, E)
    return _gl(right, 0.0, 0.5 * math.pi) + _gl(left, 0.0, 0.5 * math.pi)


def frequency(spec, E):
    """omega(E) = 2 pi / T(E)."""
    return 2.0 * math.pi / period(spec, E)


def time_from_right_turning_point(spec, E, x):
    """Time to travel along the lower arc (y < 0) from ``(x_+, 0)`` to abscissa ``x``."""
    xm, xp, xc, right, left = _halves(spec, E)
    x = min(max(x, xm), xp)
    if x >= xc:
        u = math.asin(min(1.0, (x - xc) / (xp - xc)))
        half = _gl(right, u, 0.5 * math.pi) if u < 0.5 * math.pi else 0.0
        return 0.5 * half
    u = math.asin(min(1.0, (xc - x) / (xc - xm)))
    return 0.5 * (_gl(right, 0.0, 0.5 * math.pi) + (_gl(left, 0.0, u) if u > 0.0 else 0.0))


@lru_cache(maxsize=None)
def kappa_constant(h):
    """kappa = sqrt(2) (2h)^(1/2h) * integral_{-1}^{1} ds / sqrt(1 - s^(2h)).

    With ``s = sin u`` the integrand becomes ``1/sqrt(sum_{k<h} sin^(2k) u)``.
    """
    if int(h) != h or h < 2:
        raise DomainError(f"h must be an integer >= 2, got {h!r}")
    h = int(h)

    def fun(u):
        s2 = np.sin(u) ** 2
        acc = np.ones_like(s2)
        p = np.ones_like(s2)
        for _ in range(h - 1):
            p = p * s2
            acc = acc + p
        return 1.0 / np.sqrt(acc)

    integral = 2.0 * _gl(fun, 0.0, 0.5 * math.pi)
    return math.sqrt(2.0) * (2.0 * h) ** (1.0 / (2 * h)) * integral


@dataclass(frozen=True)
class FrequencyAsymptotics:
    """Coefficients of ``omega(E) = E^((h-1)/2h) (omega0 + omega2 E^(-1/h) + ...)``; omega1 is 0."""

    kappa: float
    omega0: float
    omega2: float
    omega1: float = 0.0


def omega_asym(spec, orbit):
    """Large-energy frequency coefficients from averages over the normalized orbit.

    The unperturbed level ``J`` has ``xi = J^(1/2h) X0`` and frequency
    ``chi(J) = omega0 J^((h-1)/2h)``. Treating ``u_{2h-2} x^(2h-2)`` to first
    order and ``u_{2h-1} x^(2h-1)`` (zero orbit mean) to second order, and
    re-expressing the frequency through the true energy, gives

        omega2 = omega0 (h-1)/(2h) u_{2h-2} <X0^(2h-2)>
               - omega0 (3h-1)(h-1)/(8h^2) u_{2h-1}^2 <X0^(4h-2)>
    """
    h = spec.h
    if orbit.h != h:
        raise DomainError("orbit and potential have different h")
    omega0 = 2.0 * math.pi / orbit.kappa
    x0 = orbit.X0
    u_a = spec.coeff(2 * h - 2)
    u_b = spec.coeff(2 * h - 1)
    term_a = omega0 * (h - 1) / (2.0 * h) * u_a * float(np.mean(x0 ** (2 * h - 2)))
    term_b = -omega0 * (3 * h - 1) * (h - 1) / (8.0 * h * h) * u_b**2 * float(np.mean(x0 ** (4 * h - 2)))
    return FrequencyAsymptotics(kappa=orbit.kappa, omega0=omega0, omega2=term_a + term_b)
