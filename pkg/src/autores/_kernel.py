"""Compiled right-hand side and Dormand-Prince 8(5,3) stepper.

The perturbation is passed as a flat table, one row per Fourier component:
``(channel, k, i, j, m, cos_coef, sin_coef)`` meaning

    t^(-a/q) * t^(-k/q) * (cos_coef cos(mS) + sin_coef sin(mS)) * x^i y^j

added to dx/dt (channel 0, the f table) or dy/dt (channel 1, the g table).
Outputs are produced by landing steps exactly on the requested times, so no
interpolation error enters the recorded states.
"""

import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

_NS = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_NS, :_NS])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_NS])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)

TWO_PI_HI = 6.283185307179586
TWO_PI_LO = 2.4492935982947064e-16

STATUS_OK = 0
STATUS_DOMAIN_EXIT = 1
STATUS_STEP_UNDERFLOW = 2
STATUS_MAX_STEPS = 3


# -- double-double helpers -------------------------------------------------

@njit(cache=True, inline="always")
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True, inline="always")
def _split(a):
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


@njit(cache=True, inline="always")
def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True, inline="always")
def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    e += ah * bl + al * bh
    return _two_sum(p, e)


@njit(cache=True)
def chirp_phase_dd(t, s, b, q):
    """``s * t^(1+b/q)`` as an unevaluated sum ``hi + lo`` and reduced mod 2 pi."""
    qi = int(q)
    bi = int(b)
    r0 = t ** (1.0 / qi)
    # Newton correction of the q-th root, residual formed in double-double
    ph, pl = r0, 0.0
    for _ in range(qi - 1):
        ph, pl = _dd_mul(ph, pl, r0, 0.0)
    rh, rl = _two_sum(t, -ph)
    res = rh + (rl - pl)
    corr = res / (qi * r0 ** (qi - 1))
    xh, xl = _two_sum(r0, corr)
    sh, sl = 1.0, 0.0
    for _ in range(qi + bi):
        sh, sl = _dd_mul(sh, sl, xh, xl)
    sh, sl = _dd_mul(sh, sl, s, 0.0)
    return sh, sl, _reduce(sh, sl, TWO_PI_HI, TWO_PI_LO)


@njit(cache=True)
def _reduce(sh, sl, ph, pl):
    """``(sh + sl) mod (ph + pl)`` in ``[0, ph)`` for a double-double period."""
    n = math.floor(sh / ph)
    p, e = _two_prod(n, ph)
    red = ((sh - p) - e) + (sl - n * pl)
    while red < 0.0:
        red += ph
    while red >= ph:
        red -= ph
    return red


@njit(cache=True)
def chirp_phase_mod(t, s, b, q, k):
    """``s t^(1+b/q)`` reduced modulo ``2 pi k`` for an integer ``k >= 1``."""
    sh, sl, _ = chirp_phase_dd(t, s, b, q)
    ph, pe = _two_prod(TWO_PI_HI, k)
    return _reduce(sh, sl, ph, pe + TWO_PI_LO * k)


# -- vector field ------------------------------------------------------------

@njit(cache=True)
def rhs(t, x, y, dU, terms, chirp):
    f = dU[dU.size - 1]
    for n in range(dU.size - 2, -1, -1):
        f = f * x + dU[n]
    dx = y
    dy = -f
    nt = terms.shape[0]
    if nt > 0:
        s = chirp[0]
        a = chirp[1]
        b = chirp[2]
        q = chirp[3]
        S = chirp_phase_dd(t, s, b, q)[2]
        lt = math.log(t)
        fsum = 0.0
        gsum = 0.0
        for r in range(nt):
            m = terms[r, 4]
            w = terms[r, 5] * math.cos(m * S) + terms[r, 6] * math.sin(m * S)
            k = terms[r, 1]
            if k != 0.0:
                w *= math.exp(-k / q * lt)
            for _ in range(int(terms[r, 2])):
                w *= x
            for _ in range(int(terms[r, 3])):
                w *= y
            if terms[r, 0] == 0.0:
                fsum += w
            else:
                gsum += w
        amp = math.exp(-a / q * lt)
        dx += amp * fsum
        dy += amp * gsum
    return dx, dy


@njit(cache=True)
def energy(x, y, Uc):
    u = Uc[Uc.size - 1]
    for n in range(Uc.size - 2, -1, -1):
        u = u * x + Uc[n]
    return 0.5 * y * y + u


@njit(cache=True)
def integrate(t0, x0, y0, t_out, rtol, atol, ceil_frac, dU, Uc, terms, chirp, e_floor, max_steps):
    """Integrate from ``(t0, x0, y0)`` and record the state at every ``t_out``.

    Returns ``(states, n_recorded, status, n_steps, t_reached)``; on a domain
    exit (energy below ``e_floor``) ``t_reached`` is the time of the first
    accepted step found below the floor.
    """
    nout = t_out.size
    out = np.empty((nout, 2))
    out[:, :] = np.nan
    if nout == 0:
        return out, 0, STATUS_OK, 0, t0
    direction = 1.0 if t_out[nout - 1] >= t0 else -1.0
    K = np.empty((_NS + 1, 2))
    t = t0
    x = x0
    y = y0
    idx = 0
    while idx < nout and (t_out[idx] - t) * direction <= 0.0:
        out[idx, 0] = x
        out[idx, 1] = y
        idx += 1
    if idx == nout:
        return out, idx, STATUS_OK, 0, t
    forced = terms.shape[0] > 0
    theta = 0.0
    if forced:
        theta = chirp[0] * (1.0 + chirp[2] / chirp[3])
    fx, fy = rhs(t, x, y, dU, terms, chirp)
    # initial step from the local time scale
    d0 = math.sqrt(((x / (atol + rtol * abs(x))) ** 2 + (y / (atol + rtol * abs(y))) ** 2) / 2.0)
    d1 = math.sqrt(((fx / (atol + rtol * abs(x))) ** 2 + (fy / (atol + rtol * abs(y))) ** 2) / 2.0)
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, abs(t_out[nout - 1] - t0))
    nsteps = 0
    status = STATUS_OK
    while idx < nout:
        if nsteps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        hmax = np.inf
        if forced and ceil_frac > 0.0:
            hmax = ceil_frac * 2.0 * math.pi / (theta * abs(t) ** (chirp[2] / chirp[3]))
        h_try = min(h, hmax)
        t_target = t_out[idx]
        landing = False
        if h_try >= abs(t_target - t):
            h_try = abs(t_target - t)
            landing = True
        if h_try < 1e-14 * max(1.0, abs(t)):
            if landing:
                # already at the output node within roundoff
                out[idx, 0] = x
                out[idx, 1] = y
                idx += 1
                continue
            status = STATUS_STEP_UNDERFLOW
            break
        hs = h_try * direction
        K[0, 0] = fx
        K[0, 1] = fy
        for st in range(1, _NS):
            dx = 0.0
            dy = 0.0
            for j in range(st):
                dx += _A[st, j] * K[j, 0]
                dy += _A[st, j] * K[j, 1]
            K[st, 0], K[st, 1] = rhs(t + _C[st] * hs, x + hs * dx, y + hs * dy, dU, terms, chirp)
        bx = 0.0
        by = 0.0
        for j in range(_NS):
            bx += _B[j] * K[j, 0]
            by += _B[j] * K[j, 1]
        t_new = t_target if landing else t + hs
        x_new = x + hs * bx
        y_new = y + hs * by
        K[_NS, 0], K[_NS, 1] = rhs(t_new, x_new, y_new, dU, terms, chirp)
        sx = atol + rtol * max(abs(x), abs(x_new))
        sy = atol + rtol * max(abs(y), abs(y_new))
        e5x = 0.0
        e5y = 0.0
        e3x = 0.0
        e3y = 0.0
        for j in range(_NS + 1):
            e5x += _E5[j] * K[j, 0]
            e5y += _E5[j] * K[j, 1]
            e3x += _E3[j] * K[j, 0]
            e3y += _E3[j] * K[j, 1]
        e5 = (e5x / sx) ** 2 + (e5y / sy) ** 2
        e3 = (e3x / sx) ** 2 + (e3y / sy) ** 2
        den = e5 + 0.01 * e3
        err = 0.0 if den == 0.0 else h_try * e5 / math.sqrt(den * 2.0)
        if err <= 1.0:
            nsteps += 1
            t = t_new
            x = x_new
            y = y_new
            fx = K[_NS, 0]
            fy = K[_NS, 1]
            factor = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** (-1.0 / 8.0))
            if not landing or factor < 1.0:
                h = h_try * factor
            if landing:
                out[idx, 0] = x
                out[idx, 1] = y
                idx += 1
            if energy(x, y, Uc) < e_floor:
                status = STATUS_DOMAIN_EXIT
                break
        else:
            h = h_try * max(0.2, 0.9 * err ** (-1.0 / 8.0))
    return out, idx, status, nsteps, t
