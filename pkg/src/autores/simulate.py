"""Direct integration of the forced system, observables and regime classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel
from .averaging import TrigPoly, find_equilibria, pending_drag, q00
from .chirp import resonant_energy
from .errors import DomainError, NumericError, ResonanceOnsetError
from .orbit import from_energy_angle, to_energy_angle
from .potential import energy_threshold, eval_hamiltonian

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
POINTS_PER_DECADE = 256
STEP_CEILING_FRACTION = 1.0 / 20.0
MAX_STEPS = 200_000_000


@dataclass(frozen=True)
class Thresholds:
    exponent_tol: float = 0.05
    circ_std: float = 0.5
    bound_factor: float = 3.0


# -- vector field --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class VectorField:
    """Compiled right-hand side of the forced system plus the data it runs on."""

    pot: object
    spec: object
    dU: np.ndarray = field(repr=False)
    Uc: np.ndarray = field(repr=False)
    terms: np.ndarray = field(repr=False)
    chirp: np.ndarray = field(repr=False)

    def __call__(self, t, x, y):
        if not t > 0:
            raise DomainError(f"the forced vector field is defined for t > 0, got {t!r}")
        return _kernel.rhs(float(t), float(x), float(y), self.dU, self.terms, self.chirp)


def build_rhs(pot, spec):
    terms = spec.term_table() if spec is not None else np.zeros((0, 7))
    chirp = spec.chirp_array() if spec is not None else np.zeros(4)
    return VectorField(
        pot, spec,
        np.ascontiguousarray(pot.dcoeffs()), np.ascontiguousarray(pot.coeffs()),
        np.ascontiguousarray(terms), np.ascontiguousarray(chirp),
    )


def log_grid(t_start, t_end, per_decade=POINTS_PER_DECADE):
    n = int(math.ceil(per_decade * math.log10(t_end / t_start)))
    grid = t_start * 10.0 ** (np.arange(n + 1) / per_decade)
    grid[-1] = t_end
    return grid[grid <= t_end]


# -- trajectories ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray
    I: np.ndarray
    status: str = "ok"
    t_exit: float | None = None
    n_steps: int = 0
    theta: np.ndarray | None = None
    theta_proxy: np.ndarray | None = None
    I_star: np.ndarray | None = None
    I_over_tpow: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.size

    def csv_columns(self):
        n = self.times.size
        blank = np.full(n, np.nan)
        return {
            "t": self.times,
            "x": self.states[:, 0],
            "y": self.states[:, 1],
            "I": self.I,
            "theta_exact": blank if self.theta is None else self.theta,
            "theta_proxy": blank if self.theta_proxy is None else self.theta_proxy,
            "I_star": blank if self.I_star is None else self.I_star,
            "I_over_tpow": blank if self.I_over_tpow is None else self.I_over_tpow,
        }


_STATUS = {
    _kernel.STATUS_OK: "ok",
    _kernel.STATUS_DOMAIN_EXIT: "domain_exit",
    _kernel.STATUS_STEP_UNDERFLOW: "step_underflow",
    _kernel.STATUS_MAX_STEPS: "max_steps",
}


def integrate(rhs, ic, t_end, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, times=None,
              e_floor=None, ceiling=STEP_CEILING_FRACTION, max_steps=MAX_STEPS):
    """Integrate from ``ic = (t_s, x_s, y_s)`` and record states on a log grid.

    A drop of the energy below ``e_floor`` (default E1) ends the run with
    status ``"domain_exit"``; the record then holds the samples reached.
    Step-size collapse raises NumericError.
    """
    t_s, x_s, y_s = (float(v) for v in ic)
    forced = rhs.terms.shape[0] > 0
    if forced and not t_s > 0:
        raise DomainError(f"start time must be positive, got {t_s!r}")
    if times is None:
        times = log_grid(t_s, t_end)
    times = np.ascontiguousarray(times, dtype=float)
    if e_floor is None:
        e_floor = energy_threshold(rhs.pot)[1]
    out, n, status, steps, t_reached = _kernel.integrate(
        t_s, x_s, y_s, times, rtol, atol, ceiling if forced else 0.0,
        rhs.dU, rhs.Uc, rhs.terms, rhs.chirp, float(e_floor), max_steps,
    )
    name = _STATUS[status]
    if name in ("step_underflow", "max_steps"):
        raise NumericError(f"integration stopped at t = {t_reached:.6g}: {name.replace('_', ' ')}")
    states = out[:n].copy()
    I = eval_hamiltonian(rhs.pot, states[:, 0], states[:, 1])
    meta = {"t_s": t_s, "t_end": float(t_end), "rtol": rtol, "atol": atol, "x_s": x_s, "y_s": y_s}
    return TrajectoryRecord(
        times[:n].copy(), states, np.atleast_1d(I), name,
        float(t_reached) if name == "domain_exit" else None, int(steps), meta=meta,
    )


def _wrap(a):
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def observables(record, pot, spec, setup):
    """Exact and polar-angle phase differences, resonant energy and scaled energy.

    ``theta_exact = phi - S/kappa`` with ``phi`` the true angle variable;
    ``theta_proxy`` uses ``atan2(-y, x)`` in place of ``phi``. Points at or
    below E0 get NaN angles.
    """
    k = setup.kappa_res
    t = record.times
    x, y = record.states[:, 0], record.states[:, 1]
    e0 = energy_threshold(pot)[0]
    s_over_k = np.array([
        _kernel.chirp_phase_mod(float(ti), spec.s, float(spec.b), float(spec.q), float(k)) / k for ti in t
    ])
    phi = np.full(t.size, np.nan)
    for n, (xi, yi, Ii) in enumerate(zip(x, y, record.I)):
        if Ii > e0:
            phi[n] = to_energy_angle(pot, xi, yi)[1]
    exact = _unwrap_nan(_wrap(phi - s_over_k))
    proxy = np.unwrap(_wrap(np.arctan2(-y, x) - s_over_k))
    i_star = np.array([_resonant_or_nan(setup, pot, float(ti)) for ti in t])
    return replace(
        record,
        theta=exact,
        theta_proxy=proxy,
        I_star=i_star,
        I_over_tpow=record.I / t ** setup.growth_exponent,
    )


def _resonant_or_nan(setup, pot, t):
    try:
        return resonant_energy(setup, pot, t)
    except ResonanceOnsetError:
        return math.nan


def _unwrap_nan(a):
    out = a.copy()
    ok = np.isfinite(a)
    if ok.any():
        out[ok] = np.unwrap(a[ok])
    return out


# -- initial data ----------------------------------------------------------------

def locked_phase_target(drift, setup=None, t_s=None):
    """Stable locked phase, or the phase of weakest drift when no equilibrium exists.

    With ``setup`` and ``t_s`` given, a drag that enters above the leading
    level is added at its size at ``t_s`` and the stable zero closest to the
    leading-order phase is returned instead.
    """
    eq = drift.stable_equilibrium
    if eq is not None and setup is not None and t_s is not None:
        shift = pending_drag(drift, setup, t_s)
        if shift != 0.0:
            lam = drift.Lambda + TrigPoly(shift)
            moved = find_equilibria(replace(drift, Lambda=lam, Lambda_samples=lam(drift.theta_grid)))
            period = 2.0 * math.pi / setup.kappa_res
            stable = [e[0] for e in moved.equilibria if e[1] < 0.0]
            if stable:
                gap = lambda p: abs((p - eq[0] + period / 2) % period - period / 2)
                return min(stable, key=gap), True
    if eq is not None:
        return eq[0], True
    th = drift.theta_grid
    return float(th[np.argmin(np.abs(drift.Lambda_samples))]), False


def locked_r(drift, setup, t, phi):
    """Leading locked amplitude ``r = rho0 tau^(-M/N)`` with ``rho0 = -Omega_M(phi) / Q``."""
    tau = np.asarray(t, dtype=float) ** float(setup.nu) / float(setup.nu)
    return -drift.Omega(phi) / q00(setup) * tau ** (-setup.M / setup.N)


def on_resonance_ic(setup, pot, spec, drift, t_s, dtheta=0.0, dr=0.0, drag_corrected=True):
    """State on the resonant manifold at the locked phase (plus optional offsets)."""
    if drag_corrected:
        phi0, has_eq = locked_phase_target(drift, setup, t_s)
    else:
        phi0, has_eq = locked_phase_target(drift)
    i_star = resonant_energy(setup, pot, t_s)
    r = (locked_r(drift, setup, t_s, phi0) if has_eq else 0.0) + dr
    energy = i_star * (1.0 + t_s ** (-float(setup.mu)) * r) ** (2 * pot.h)
    s_mod = _kernel.chirp_phase_mod(float(t_s), spec.s, float(spec.b), float(spec.q), float(setup.kappa_res))
    phi = phi0 + dtheta + s_mod / setup.kappa_res
    x, y = from_energy_angle(pot, energy, phi)
    return x, y


# -- classification --------------------------------------------------------------

@dataclass(frozen=True)
class ClassificationResult:
    regime: str
    growth_exponent: float
    growth_prefactor: float
    phi0_estimate: float
    circ_std: float
    max_ratio: float
    residuals: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "regime": self.regime,
            "growth_exponent": self.growth_exponent,
            "growth_prefactor": self.growth_prefactor,
            "phi0_estimate": self.phi0_estimate,
            "circ_std": self.circ_std,
            "max_ratio": self.max_ratio,
            "residuals": self.residuals,
        }


def circular_stats(angles, period=2.0 * math.pi):
    """Circular mean (in ``[0, period)``) and circular standard deviation of ``angles``.

    Angles are first scaled so that ``period`` maps onto a full turn; the
    standard deviation is reported in the original units.
    """
    a = np.asarray(angles)
    a = a[np.isfinite(a)]
    if a.size == 0:
        return math.nan, math.inf
    f = 2.0 * math.pi / period
    z = np.mean(np.exp(1j * f * a))
    R = min(1.0, abs(z))
    std = math.inf if R == 0.0 else math.sqrt(-2.0 * math.log(R)) / f
    mean = (math.atan2(z.imag, z.real) / f) % period
    # a tiny negative angle rounds up to the period itself
    return (0.0 if mean >= period else mean), std


def classify(record, setup, thresholds=Thresholds()):
    """Locked, drifting or undetermined, from the trailing decade of the run."""
    t_s = record.meta.get("t_s", record.times[0])
    t_end = record.meta.get("t_end", record.times[-1])
    if math.log10(t_end / t_s) < 1.5:
        raise DomainError("classification needs at least 1.5 decades of time past t_s")
    t, I = record.times, record.I
    I0 = I[0]
    max_ratio = float(np.max(I) / I0) if I0 > 0 else math.inf
    last_half = t >= 0.5 * (t[0] + t[-1])
    half_ratio = float(np.max(I[last_half]) / I0) if (I0 > 0 and last_half.any()) else max_ratio
    if record.status == "domain_exit":
        return ClassificationResult("drifting", math.nan, math.nan, math.nan, math.inf, max_ratio,
                                    {"reason": "domain exit", "t_exit": record.t_exit})
    window = t >= t[-1] / 10.0
    lt, lI = np.log(t[window]), np.log(I[window])
    slope, icpt = np.polyfit(lt, lI, 1)
    resid = float(np.sqrt(np.mean((lI - (slope * lt + icpt)) ** 2)))
    target = setup.growth_exponent
    # prefactor with the exponent pinned; a free intercept amplifies slope error
    prefactor = float(np.exp(np.mean(lI - target * lt)))
    theta = record.theta if record.theta is not None else record.theta_proxy
    if theta is not None:
        mean, std = circular_stats(theta[window], 2.0 * math.pi / setup.kappa_res)
    else:
        mean, std = math.nan, math.inf
    locked = abs(slope - target) <= thresholds.exponent_tol * target and std <= thresholds.circ_std
    if locked:
        regime = "locked"
    elif half_ratio <= thresholds.bound_factor:
        regime = "drifting"
    else:
        regime = "undetermined"
    return ClassificationResult(
        regime, float(slope), prefactor, float(mean), float(std), max_ratio,
        {"fit_rms": resid, "window_start": float(t[window][0]), "last_half_ratio": half_ratio,
         "free_prefactor": float(math.exp(icpt))},
    )


# -- contraction probe -----------------------------------------------------------

@dataclass(frozen=True)
class ContractionResult:
    exponent: float
    ci: tuple
    tau: np.ndarray = field(repr=False)
    W0: np.ndarray = field(repr=False)
    stretched_slope: float = math.nan
    early_slope: float = math.nan
    late_slope: float = math.nan
    escaped: bool = False
    power_rms: float = math.nan
    stretched_rms: float = math.nan


def reduced_variables(record, setup):
    """``r = t^mu ((I/I*)^(1/2h) - 1)`` and ``tau = t^nu / nu`` along a trajectory."""
    h = setup.h
    mu, nu = float(setup.mu), float(setup.nu)
    t = record.times
    r = t**mu * ((record.I / record.I_star) ** (1.0 / (2 * h)) - 1.0)
    tau = t**nu / nu
    return tau, r


def locked_track(drift, setup, times):
    """Locked phase at each time, following the drag when it sits above the leading level."""
    if pending_drag(drift, setup, times[0]) == 0.0:
        phi, _ = locked_phase_target(drift)
        return np.full(times.size, phi)
    return np.array([locked_phase_target(drift, setup, t)[0] for t in times])


def contraction_probe(pot, spec, setup, drift, verdict, t_s, t_end, offsets=None, eps=0.05,
                      fit_from=None, reference="run", rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Decay of the weighted deviation ``W0`` of an off-locked ensemble.

    Each offset is ``(dtheta, dr)`` applied to the on-resonance data. By
    default four offsets of equal initial ``W0`` are used: ``+-eps`` in the
    phase and the matching ``r`` displacement. The
    deviation of every run is taken either from an unperturbed locked run
    (``reference="run"``) or from the truncated locked expansion
    ``(rho0 tau^(-M/N), phi0)`` (``reference="asymptotic"``), which carries
    its own truncation floor. The ensemble-mean ``W0`` is fitted against
    ``log tau``; the returned exponent carries a two-sigma interval from the
    least-squares fit.
    """
    eq = drift.stable_equilibrium
    if eq is None:
        raise DomainError("contraction probe needs a stable locked phase")
    lam = abs(eq[1])
    Q = q00(setup)
    L, N = drift.L, setup.N
    tau_s = t_s ** float(setup.nu) / float(setup.nu)
    if offsets is None:
        dr = eps * math.sqrt(tau_s ** (-L / N) * lam / Q)
        offsets = ((eps, 0.0), (-eps, 0.0), (0.0, dr), (0.0, -dr))
    rhs = build_rhs(pot, spec)
    times = log_grid(t_s, t_end)
    period = 2.0 * math.pi / setup.kappa_res
    tau = times ** float(setup.nu) / float(setup.nu)

    def run(dth, dr):
        x, y = on_resonance_ic(setup, pot, spec, drift, t_s, dth, dr)
        return observables(integrate(rhs, (t_s, x, y), t_end, rtol, atol, times=times), pot, spec, setup)

    if reference == "run":
        ref = run(0.0, 0.0)
        if ref.times.size != times.size or ref.status != "ok":
            raise DomainError("reference run did not stay locked")
        _, rho0 = reduced_variables(ref, setup)
        phi_star = ref.theta
    elif reference == "asymptotic":
        phi_star = locked_track(drift, setup, times)
        rho0 = locked_r(drift, setup, times, phi_star)
    else:
        raise ValueError(f"reference must be 'run' or 'asymptotic', got {reference!r}")
    W = []
    escaped = False
    for dth, dr in offsets:
        rec = run(dth, dr)
        if rec.times.size != times.size or rec.status != "ok":
            escaped = True
            continue
        _, r = reduced_variables(rec, setup)
        dphi = (rec.theta - phi_star + period / 2.0) % period - period / 2.0
        W.append(0.5 * (Q * (r - rho0) ** 2 + tau ** (-L / N) * lam * dphi**2))
    if not W:
        return ContractionResult(math.inf, (math.inf, math.inf), tau, np.array([]), escaped=True)
    W0 = np.mean(W, axis=0)
    start = tau[0] * 10.0 if fit_from is None else fit_from
    sel = (tau >= start) & (W0 > 0)
    lt, lw = np.log(tau[sel]), np.log(W0[sel])
    (slope, icpt), cov = np.polyfit(lt, lw, 1, cov=True)
    err = 2.0 * math.sqrt(cov[0, 0])
    half = lt.size // 2
    early = np.polyfit(lt[:half], lw[:half], 1)[0]
    late = np.polyfit(lt[half:], lw[half:], 1)[0]
    power_rms = float(np.sqrt(np.mean((lw - (slope * lt + icpt)) ** 2)))
    stretch = verdict.stretch_power
    s_slope = s_rms = math.nan
    if stretch:
        u = tau[sel] ** stretch
        s_slope, s_icpt = np.polyfit(u, lw, 1)
        s_rms = float(np.sqrt(np.mean((lw - (s_slope * u + s_icpt)) ** 2)))
    grow = escaped or slope > 0
    return ContractionResult(float(slope), (float(slope - err), float(slope + err)), tau, W0,
                             float(s_slope), float(early), float(late), grow, power_rms, s_rms)
