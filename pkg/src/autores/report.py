"""Theory reports, single runs and their artifacts.

Every run writes a trajectory CSV, a classification JSON, a theory JSON, a
gnuplot script reading the CSV, and a matplotlib PNG of the same overlay.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .averaging import (
    averaged_drift,
    example_gamma,
    example_thresholds,
    find_equilibria,
    locked_amplitude,
    stability_verdict,
)
from .chirp import exponents, onset_time
from .errors import DegenerateError
from .orbit import default_orbit
from .simulate import build_rhs, classify, integrate, log_grid, observables, on_resonance_ic

TRAJECTORY_COLUMNS = ("t", "x", "y", "I", "theta_exact", "theta_proxy", "I_star", "I_over_tpow")


def clean(obj):
    """JSON-safe copy: non-finite floats become None, numpy scalars become floats."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(obj):
    return json.dumps(clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


# -- theory --------------------------------------------------------------------

def _engine(cfg, orbit):
    setup = exponents(cfg.perturbation, cfg.potential, cfg.kappa)
    drift = find_equilibria(averaged_drift(cfg.perturbation, cfg.potential, orbit, setup))
    return setup, drift


def _smallness_warning(setup):
    k = setup.kappa_res
    return (f"resonance order {k}: the admissible region shrinks like s^2/B = O(k^3 exp(-k pi/2)), "
            f"so the growth prefactor c^-4 = O(exp(-k pi)) ~ {math.exp(-k * math.pi):.2e} "
            f"(here c^-4 = {setup.c_kappa ** -4:.3e}); expect slow, fragile capture")


def report_theory(cfg, orbit=None):
    """Closed-form and engine predictions for a config, without simulating."""
    pot, pert = cfg.potential, cfg.perturbation
    orbit = orbit or default_orbit(pot.h)
    setup, drift = _engine(cfg, orbit)
    warnings = []
    out = {
        "config_hash": cfg.config_hash(),
        "sigma": str(setup.sigma), "mu": str(setup.mu), "nu": str(setup.nu),
        "M": setup.M, "N": setup.N, "L": drift.L, "kappa_res": setup.kappa_res,
        "c_kappa": setup.c_kappa,
        "growth_law": {
            "exponent": setup.growth_exponent,
            "prefactor": setup.growth_prefactor,
            "form": f"I*(t) ~ c^-{2 * pot.h} t^{setup.growth_exponent:.6g}",
        },
        "onset_time": onset_time(setup, pot),
        "drag_included": drift.drag_included,
        "equilibria": [{"phi": p, "slope": s} for p, s in drift.equilibria],
    }
    ex = cfg.example
    gamma = D = None
    if ex is not None:
        B = cfg.params.get("B")
        C = cfg.params.get("C", 1.0)
        thr = example_thresholds(ex, orbit, setup, B=B, C=C)
        out.update(d=thr.d, B_crit=thr.B_crit, phi0_branches=list(thr.phi0_branches), **thr.extras)
        gamma, D = example_gamma(ex, orbit, setup, C)
        if ex == 1 and setup.kappa_res >= 3:
            warnings.append(_smallness_warning(setup))
        if ex == 1 and setup.kappa_res % 2 == 0:
            warnings.append(f"even order {setup.kappa_res} does not couple to the odd orbit: no locking")
    else:
        out.update(d=None, B_crit=None, phi0_branches=[])
    if cfg.analysis.gamma_D is not None:
        gamma, D = cfg.analysis.gamma_D, cfg.analysis.D
    eq = drift.stable_equilibrium
    out["phi0"] = eq[0] if eq else None
    out["lambda_L"] = eq[1] if eq else None
    out["rho0"] = locked_amplitude(drift, setup) if eq else None
    out["gamma_D"], out["D"] = gamma, D
    verdict = None
    if not drift.equilibria:
        verdict = {"regime": "no_locking"}
    elif gamma is None:
        warnings.append("gamma_D not supplied: stability verdict needs analysis.gamma_D and analysis.D")
    else:
        try:
            v = stability_verdict(drift, setup, gamma, D)
        except DegenerateError as exc:
            warnings.append(f"degenerate stability data: {exc}")
        else:
            verdict = {"regime": v.regime, "predicted_contraction_exponent": v.predicted_contraction_exponent,
                       "stretch_power": v.stretch_power}
    out["verdict"] = verdict
    out["warnings"] = warnings
    return out


# -- single run ----------------------------------------------------------------

def simulate_config(cfg, orbit=None):
    """Integrate one config; returns ``(record, classification, setup, drift)``."""
    pot, pert, sim = cfg.potential, cfg.perturbation, cfg.simulation
    orbit = orbit or default_orbit(pot.h)
    setup, drift = _engine(cfg, orbit)
    if sim.ic_mode == "on_resonance":
        x0, y0 = on_resonance_ic(setup, pot, pert, drift, sim.t_s, sim.dtheta, sim.dr)
    else:
        x0, y0 = sim.x0, sim.y0
    times = log_grid(sim.t_s, sim.t_end, sim.points_per_decade)
    rec = integrate(build_rhs(pot, pert), (sim.t_s, x0, y0), sim.t_end, sim.rtol, sim.atol, times=times)
    rec = observables(rec, pot, pert, setup)
    return rec, classify(rec, setup, cfg.analysis.thresholds), setup, drift


def trajectory_csv(record):
    cols = record.csv_columns()
    data = np.column_stack([cols[c] for c in TRAJECTORY_COLUMNS])
    lines = [",".join(TRAJECTORY_COLUMNS)]
    lines += [",".join(repr(float(v)) for v in row) for row in data]
    return "\n".join(lines) + "\n"


def run_single(cfg, out_dir, orbit=None, plots=True):
    """Simulate, classify and write all artifacts; returns ``{name: path}``.

    Files written before a failure are removed again.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        path = out_dir / name
        path.write_text(text)
        written.append(path)
        return path

    try:
        theory = report_theory(cfg, orbit)
        rec, cls, setup, _ = simulate_config(cfg, orbit)
        paths = {
            "config": put("config.json", cfg.to_json()),
            "trajectory": put("trajectory.csv", trajectory_csv(rec)),
            "classification": put("classification.json", dumps({
                "config_hash": cfg.config_hash(), "status": rec.status, "t_exit": rec.t_exit,
                "n_steps": rec.n_steps, **cls.to_dict(),
            })),
            "theory": put("theory.json", dumps(theory)),
        }
        phi0 = theory["phi0"]
        paths["gnuplot"] = put("run.gp", gnuplot_run_script(setup, phi0))
        if plots:
            png = out_dir / "run.png"
            written.append(png)
            render_run_png(rec, setup, phi0, png)
            paths["png"] = png
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return paths


# -- plotting ------------------------------------------------------------------

def gnuplot_run_script(setup, phi0):
    pref, g = setup.growth_prefactor, setup.growth_exponent
    period = 2.0 * math.pi / setup.kappa_res
    lines = [
        "# I(t) against the resonant growth law, and the phase difference",
        "set datafile separator ','",
        "set terminal pngcairo size 1100,450",
        "set output 'run_gnuplot.png'",
        "set multiplot layout 1,2",
        "set logscale xy",
        "set xlabel 't'; set ylabel 'I'",
        f"plot 'trajectory.csv' using 1:4 skip 1 with lines title 'I(t)', \\",
        f"     {pref!r}*x**{g!r} with lines dt 2 lc rgb 'gray' title 'c^-2h t^{g:.4g}'",
        "unset logscale y",
        "set ylabel 'theta'",
    ]
    mod = f"(($5 - {period!r}*floor($5/{period!r})))"
    if phi0 is not None:
        lines.append(f"plot 'trajectory.csv' using 1:{mod} skip 1 with dots title 'theta mod 2pi/k', \\")
        lines.append(f"     {phi0!r} with lines dt 2 lc rgb 'gray' title 'phi0'")
    else:
        lines.append(f"plot 'trajectory.csv' using 1:{mod} skip 1 with dots title 'theta mod 2pi/k'")
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_run_png(record, setup, phi0, path):
    plt = _pyplot()
    t = record.times
    period = 2.0 * math.pi / setup.kappa_res
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
    ax1.loglog(t, record.I, lw=1.0, label="I(t)")
    ax1.loglog(t, setup.growth_prefactor * t ** setup.growth_exponent, "--", color="gray",
               label=f"$c^{{-4}} t^{{{setup.growth_exponent:.3g}}}$")
    ax1.set_xlabel("t")
    ax1.set_ylabel("I")
    ax1.legend(frameon=False)
    if record.theta_proxy is not None:
        ax2.semilogx(t, np.mod(record.theta_proxy, period), ".", ms=1.5, color="tab:orange", alpha=0.4,
                     label=r"$\tilde\theta$ (proxy)")
    if record.theta is not None:
        ax2.semilogx(t, np.mod(record.theta, period), ".", ms=2.5, color="tab:blue", label=r"$\tilde\theta$ (exact)")
    if phi0 is not None:
        ax2.axhline(phi0, ls="--", color="gray", label=r"$\varphi_0$")
    ax2.set_ylim(0.0, period)
    ax2.set_xlabel("t")
    ax2.set_ylabel(r"$\tilde\theta$ mod $2\pi/\varkappa$")
    ax2.legend(frameon=False, markerscale=4)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)


def render_partition_png(cells, axes, curves, path):
    """Locked/drifting map over a 2-D grid with threshold curves overlaid.

    ``cells`` holds ``(x, y, regime)``; ``curves`` maps a label to ``(xs, ys)``.
    """
    plt = _pyplot()
    colors = {"locked": "tab:red", "drifting": "tab:blue", "undetermined": "tab:olive"}
    fig, ax = plt.subplots(figsize=(6, 5))
    for regime, color in colors.items():
        pts = [(x, y) for x, y, r in cells if r == regime]
        if pts:
            xs, ys = zip(*pts)
            ax.scatter(xs, ys, s=14, c=color, marker="s", label=regime)
    other = [(x, y) for x, y, r in cells if r not in colors]
    if other:
        xs, ys = zip(*other)
        ax.scatter(xs, ys, s=14, c="black", marker="x", label="failed")
    xlim = (min(c[0] for c in cells), max(c[0] for c in cells))
    ylim = (min(c[1] for c in cells), max(c[1] for c in cells))
    for label, (xs, ys) in curves.items():
        ax.plot(xs, ys, "k--", lw=1.0)
        inside = [(x, y) for x, y in zip(xs, ys) if xlim[0] <= x <= xlim[1] and ylim[0] <= y <= ylim[1]]
        if inside:
            ax.annotate(label, inside[-1], fontsize=8, ha="right", va="bottom")
    ax.set_xlabel(axes[0])
    ax.set_ylabel(axes[1])
    ax.set_xlim(*xlim)
    ax.set_ylim(*ylim)
    ax.legend(frameon=False, fontsize=8, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
