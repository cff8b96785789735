"""Normalized orbit of the quartic-type limit and the (x, y) <-> (E, phi) map.

The normalized orbit solves ``(2pi/kappa) X0' = Y0, (2pi/kappa) Y0' = -X0^(2h-1)``
on the unit energy level, starting at the right turning point. The angle
origin of every orbit in this module is the right turning point ``(x_+, 0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernel
from .errors import DomainError, NumericError
from .potential import (
    PotentialSpec,
    eval_force,
    eval_hamiltonian,
    frequency,
    kappa_constant,
    lower_threshold,
    period,
    time_from_right_turning_point,
    turning_points,
)

_NO_TERMS = np.zeros((0, 7))
_NO_CHIRP = np.zeros(4)


def flow(spec, x0, y0, times, rtol=1e-13, atol=None, t0=0.0):
    """States of the unperturbed flow at ``times`` (monotone, starting side of ``t0``)."""
    times = np.ascontiguousarray(times, dtype=float)
    if atol is None:
        atol = rtol * max(1.0, abs(x0), abs(y0))
    out, n, status, _, _ = _kernel.integrate(
        float(t0), float(x0), float(y0), times, rtol, atol, 0.0,
        np.ascontiguousarray(spec.dcoeffs()), np.ascontiguousarray(spec.coeffs()),
        _NO_TERMS, _NO_CHIRP, -np.inf, 10_000_000,
    )
    if status != _kernel.STATUS_OK or n != times.size:
        raise NumericError(f"unperturbed integration failed (status {status})")
    return out


@dataclass(frozen=True, eq=False)
class NormalizedOrbit:
    h: int
    grid: np.ndarray
    X0: np.ndarray
    Y0: np.ndarray
    kappa: float
    omega0: float
    fourier_x: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.grid.size

    def to_csv_rows(self):
        return np.column_stack([self.grid, self.X0, self.Y0])


def build_normalized_orbit(h, n=4096, rtol=1e-13):
    if n < 256 or n & (n - 1):
        raise DomainError(f"grid size must be a power of two >= 256, got {n}")
    kappa = kappa_constant(h)
    mono = PotentialSpec.monomial(h)
    x_start = (2.0 * h) ** (1.0 / (2 * h))
    grid = 2.0 * math.pi * np.arange(n) / n
    # on the unit level of x^(2h)/(2h) the period in t is exactly kappa
    times = np.append(kappa * grid / (2.0 * math.pi), kappa)
    states = flow(mono, x_start, 0.0, times, rtol=rtol, atol=rtol)
    end = states[-1]
    closure = math.hypot(end[0] - x_start, end[1])
    if closure > 1e-9:
        raise NumericError(f"normalized orbit does not close: gap {closure:.3e}")
    X0 = states[:-1, 0].copy()
    Y0 = states[:-1, 1].copy()
    X0.setflags(write=False)
    Y0.setflags(write=False)
    grid.setflags(write=False)
    coeffs = _odd_cosines(X0)
    return NormalizedOrbit(h, grid, X0, Y0, kappa, 2.0 * math.pi / kappa, coeffs)


def cosine_coefficients(samples):
    """Real coefficients ``a_m`` with ``f = a_0 + sum a_m cos(m phi) + b_m sin(m phi)``."""
    c = np.fft.rfft(samples) / samples.size
    c[1:] *= 2.0
    return c.real, -c.imag


def _odd_cosines(X0):
    a, _ = cosine_coefficients(X0)
    out = a[1::2].copy()
    out.setflags(write=False)
    return out


def fourier_spectrum(orbit):
    """Cosine coefficients ``x_j`` of ``X0 = sum_j x_j cos((2j-1) phi)``.

    The normalized orbit satisfies ``X0(phi + pi) = -X0(phi)`` and is even, so
    only odd cosine harmonics survive.
    """
    return orbit.fourier_x


def sech_coefficients(kappa, count):
    """Closed-form ``x_j`` for h = 2."""
    j = np.arange(1, count + 1)
    return 4.0 * math.pi * math.sqrt(2.0) / kappa / np.cosh((2 * j - 1) * math.pi / 2)


def spectral_antiderivative(samples):
    """Periodic antiderivative (zero mean) of a zero-mean periodic function on [0, 2pi)."""
    c = np.fft.rfft(samples)
    n = samples.size
    if abs(c[0]) > 1e-9 * n * max(1.0, float(np.max(np.abs(samples)))):
        raise NumericError("integrand has nonzero mean; antiderivative is not periodic")
    m = np.arange(c.size)
    out = np.zeros_like(c)
    out[1:] = c[1:] / (1j * m[1:])
    if n % 2 == 0:
        out[-1] = 0.0
    return np.fft.irfft(out, n)


def spectral_derivative(samples):
    c = np.fft.rfft(samples)
    n = samples.size
    m = np.arange(c.size)
    d = 1j * m * c
    if n % 2 == 0:
        d[-1] = 0.0
    return np.fft.irfft(d, n)


@dataclass(frozen=True, eq=False)
class OrbitCorrections:
    alpha1: np.ndarray
    J1: np.ndarray
    alpha1_0: float
    X1: np.ndarray
    Y1: np.ndarray


def first_order_corrections(spec, orbit):
    """First-order coefficients of ``X(phi, E) = E^(1/2h) (X0 + E^(-1/2h) X1 + ...)``.

    ``alpha1' = omega0 u_{2h-1} d/dJ(xi^(2h-1)/chi)`` at J = 1, and by the
    self-similar scaling that derivative is ``X0^(2h-1) / (2 omega0)``.
    """
    h = spec.h
    if orbit.h != h:
        raise DomainError("orbit and potential have different h")
    u = spec.coeff(2 * h - 1)
    kappa = orbit.kappa
    X0, Y0 = orbit.X0, orbit.Y0
    p = X0 ** (2 * h - 1)
    J1 = -u * p
    integrand = 0.5 * u * p
    anti = spectral_antiderivative(integrand)
    # integral from 0 is anti - anti(0); zero mean fixes alpha1_0 = anti(0)
    alpha1_0 = -float(np.mean(anti - anti[0]))
    alpha1 = alpha1_0 + (anti - anti[0])
    d_alpha_xi = kappa / (2.0 * math.pi) * Y0
    d_alpha_eta = -kappa / (2.0 * math.pi) * p
    d_J_xi = X0 / (2.0 * h)
    d_J_eta = Y0 / 2.0
    X1 = alpha1 * d_alpha_xi + J1 * d_J_xi
    Y1 = alpha1 * d_alpha_eta + J1 * d_J_eta
    return OrbitCorrections(alpha1, J1, alpha1_0, X1, Y1)


# -- energy-angle map --------------------------------------------------------

def from_energy_angle(spec, E, phi, rtol=1e-13):
    """Point of the level ``H = E`` at angle ``phi`` (angle origin ``(x_+, 0)``)."""
    _, xp = turning_points(spec, E)
    phi = math.fmod(float(phi), 2.0 * math.pi)
    if phi < 0.0:
        phi += 2.0 * math.pi
    if phi == 0.0:
        return xp, 0.0
    t = phi / frequency(spec, E)
    x, y = flow(spec, xp, 0.0, np.array([t]), rtol=rtol, atol=rtol * max(1.0, xp))[0]
    return float(x), float(y)


def to_energy_angle(spec, x, y, rtol=1e-13, tol=1e-13, max_iter=8):
    """Inverse of :func:`from_energy_angle`; ``phi`` in ``[0, 2pi)``.

    The time of flight from ``(x_+, 0)`` is first estimated by quadrature along
    the level curve and then refined by Newton steps on the integrated orbit.
    """
    E = eval_hamiltonian(spec, x, y)
    e0 = lower_threshold(spec)
    if not E > e0:
        raise DomainError(f"point ({x!r}, {y!r}) has energy {E!r} <= E0 = {e0!r}")
    T = period(spec, E)
    om = 2.0 * math.pi / T
    _, xp = turning_points(spec, E)
    t_low = time_from_right_turning_point(spec, E, x)
    t = t_low if y <= 0.0 else T - t_low
    scale = max(1.0, xp)
    for _ in range(max_iter):
        if t <= 0.0:
            px, py = xp, 0.0
        else:
            px, py = flow(spec, xp, 0.0, np.array([t]), rtol=rtol, atol=rtol * scale)[0]
        vx, vy = py, -eval_force(spec, px)
        dt = ((x - px) * vx + (y - py) * vy) / (vx * vx + vy * vy)
        t += dt
        if abs(dt) * om <= tol:
            break
    phi = math.fmod(om * t, 2.0 * math.pi)
    if phi < 0.0:
        phi += 2.0 * math.pi
    if phi >= 2.0 * math.pi:
        phi = 0.0
    return E, phi


@lru_cache(maxsize=None)
def default_orbit(h, n=4096):
    """Shared normalized orbit per degree (immutable, so safe to cache)."""
    return build_normalized_orbit(h, n)
