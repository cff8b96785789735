"""Independent reference computations used to pin derived values.

Nothing here imports the package: elliptic functions come from the AGM,
periods from scipy's general-purpose integrators.
"""

import math

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq


def agm(a, b):
    for _ in range(64):
        if abs(a - b) <= 4e-16 * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return a


def ellipk(m):
    """Complete elliptic integral of the first kind, parameter m = k^2."""
    return math.pi / (2.0 * agm(1.0, math.sqrt(1.0 - m)))


def jacobi_cn(u, m):
    """cn(u | m) by the descending AGM sequence."""
    a = [1.0]
    c = [math.sqrt(m)]
    b = math.sqrt(1.0 - m)
    while abs(c[-1]) > 1e-16 and len(a) < 64:
        an, bn = a[-1], b
        a.append(0.5 * (an + bn))
        c.append(0.5 * (an - bn))
        b = math.sqrt(an * bn)
    n = len(a) - 1
    phi = 2**n * a[-1] * u
    for k in range(n, 0, -1):
        phi = 0.5 * (phi + math.asin(c[k] / a[k] * math.sin(phi)))
    return math.cos(phi)


def kappa_h2():
    """Period of x'' = -x^3 on the level x^4/4 + y^2/2 = 1."""
    return 2.0 * math.sqrt(2.0) * ellipk(0.5)


def normalized_orbit_h2(phi):
    """X0(phi) = sqrt(2) cn(2 K phi / pi | 1/2)."""
    K = ellipk(0.5)
    return math.sqrt(2.0) * jacobi_cn(2.0 * K * phi / math.pi, 0.5)


def _U(coeffs, x):
    return sum(c * x**n for n, c in enumerate(coeffs))


def _dU(coeffs, x):
    return sum(n * c * x ** (n - 1) for n, c in enumerate(coeffs) if n)


def turning_points(coeffs, E, guess=1.0):
    f = lambda x: _U(coeffs, x) - E
    hi = guess
    while f(hi) < 0:
        hi *= 2
    lo = -guess
    while f(lo) < 0:
        lo *= 2
    xp = brentq(f, 0.0 if f(0.0) < 0 else 1e-3, hi, xtol=1e-15)
    xm = brentq(f, lo, 0.0 if f(0.0) < 0 else -1e-3, xtol=1e-15)
    return xm, xp


def period_by_return(coeffs, E):
    """Twice the flight time from (x_+, 0) to the next zero of y."""
    _, xp = turning_points(coeffs, E)

    def rhs(t, z):
        return [z[1], -_dU(coeffs, z[0])]

    def hit(t, z):
        return z[1]

    hit.direction = 1.0
    hit.terminal = True
    sol = solve_ivp(rhs, (0.0, 1e3), [xp, 0.0], method="DOP853", rtol=1e-13, atol=1e-14, events=hit)
    return 2.0 * sol.t_events[0][0]


def time_of_flight(coeffs, E, x):
    """Time from (x_+, 0) to abscissa x on the lower arc, by algebraic-weight quadrature."""
    _, xp = turning_points(coeffs, E)

    def g(s):
        gap = xp - s
        return math.sqrt(gap / (2.0 * (E - _U(coeffs, s)))) if gap > 0 else 1.0 / math.sqrt(2.0 * _dU(coeffs, xp))

    val, _ = quad(g, x, xp, weight="alg", wvar=(0.0, -0.5), epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def chirp_phase_mod(s, t, num, den, k=1):
    """``(s t^(num/den)) mod 2 pi k`` in 50-digit arithmetic."""
    import mpmath

    with mpmath.workdps(50):
        S = mpmath.mpf(s) * mpmath.power(mpmath.mpf(t), mpmath.mpf(num) / den)
        return float(mpmath.fmod(S, 2 * k * mpmath.pi))


def angle_mean(values):
    return float(np.mean(values))
