"""Command-line entry point: ``autores {theory,run,sweep,orbit,validate}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .errors import ConfigError, DomainError, EngineRefusal, NumericError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_REFUSAL = 4


def _out_dir(args, cfg, default):
    if args.out:
        return Path(args.out)
    return Path(cfg.output.get("dir", default)) if cfg is not None else Path(default)


def cmd_validate(args):
    cfg = config_mod.load(args.config)
    print(f"ok {cfg.config_hash()}")
    if args.verbose:
        sys.stdout.write(cfg.to_json())
    return EXIT_OK


def cmd_theory(args):
    from .report import dumps, report_theory

    cfg = config_mod.load(args.config)
    text = dumps(report_theory(cfg))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "theory.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args):
    from .report import run_single

    cfg = config_mod.load(args.config)
    paths = run_single(cfg, _out_dir(args, cfg, "run_out"), plots=not args.no_plots)
    cls = json.loads(paths["classification"].read_text())
    print(f"{cls['regime']}: exponent {cls['growth_exponent']}, prefactor {cls['growth_prefactor']}")
    for name, p in paths.items():
        print(f"  {name}: {p}")
    return EXIT_OK


def cmd_sweep(args):
    from .sweep import CELLS_FILE, run_sweep

    cfg = config_mod.load(args.config)
    out = _out_dir(args, cfg, "sweep_out")
    summary = run_sweep(cfg, out, jobs=args.jobs, resume=args.resume, plots=not args.no_plots)
    counts = {}
    for c in summary["cells"]:
        key = c["regime"] if c["status"] == "ok" else c["status"]
        counts[key] = counts.get(key, 0) + 1
    print(" ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    print(f"  cells: {out / CELLS_FILE}")
    print(f"  summary: {out / 'sweep.json'}")
    return EXIT_OK


def cmd_orbit(args):
    from .averaging import averaged_drift
    from .chirp import exponents
    from .orbit import build_normalized_orbit, fourier_spectrum
    from .potential import kappa_constant, omega_asym
    from .report import dumps

    cfg = config_mod.load(args.config) if args.config else None
    h = cfg.potential.h if cfg is not None else args.h
    orbit = build_normalized_orbit(h, args.n)
    out = _out_dir(args, cfg, "orbit_out")
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "orbit.csv", orbit.to_csv_rows(), delimiter=",", header="phi,X0,Y0", comments="", fmt="%.17g")
    xj = fourier_spectrum(orbit)
    rows = np.column_stack([np.arange(1, xj.size + 1), xj])
    np.savetxt(out / "fourier.csv", rows[: args.harmonics], delimiter=",", header="j,x_j", comments="",
               fmt=("%d", "%.17g"))
    info = {"h": h, "n": orbit.n, "kappa": kappa_constant(h), "omega0": orbit.omega0}
    if cfg is not None:
        freq = omega_asym(cfg.potential, orbit)
        info.update(omega2=freq.omega2)
        setup = exponents(cfg.perturbation, cfg.potential, cfg.kappa, freq)
        drift = averaged_drift(cfg.perturbation, cfg.potential, orbit, setup)
        np.savetxt(out / "drift.csv", drift.to_csv_rows(), delimiter=",", header="theta,Lambda_L,Omega_M",
                   comments="", fmt="%.17g")
        info.update(L=drift.L)
    (out / "orbit.json").write_text(dumps(info))
    print(f"orbit tables written to {out}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="autores", description="Autoresonance capture under decaying chirped forcing.")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON run configuration")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("validate", help="check a config without computing anything")
    common(sp)
    sp.add_argument("-v", "--verbose", action="store_true", help="print the normalized config")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("theory", help="closed-form and averaged predictions (no simulation)")
    common(sp)
    sp.set_defaults(func=cmd_theory)

    sp = sub.add_parser("run", help="simulate one config and write its artifacts")
    common(sp)
    sp.add_argument("--no-plots", action="store_true", help="skip the PNG rendering")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run the config's parameter grid")
    common(sp)
    sp.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    sp.add_argument("--resume", action="store_true", help="skip cells already in the output file")
    sp.add_argument("--no-plots", action="store_true", help="skip the PNG rendering")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("orbit", help="export the normalized orbit tables")
    common(sp, config_required=False)
    sp.add_argument("--h", type=int, default=2, help="degree h when no config is given")
    sp.add_argument("--n", type=int, default=4096, help="angle grid size (power of two)")
    sp.add_argument("--harmonics", type=int, default=16, help="number of Fourier coefficients to export")
    sp.set_defaults(func=cmd_orbit)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineRefusal as exc:
        print(f"engine refusal: {exc}", file=sys.stderr)
        return EXIT_REFUSAL
    except (NumericError, DomainError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
