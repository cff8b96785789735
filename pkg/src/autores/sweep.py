"""Parameter sweeps over a 2-D preset grid with resumable JSON-lines output.

Cells run in a process pool, but a single writer appends them strictly in
cell-index order, so the output is byte-identical for any worker count and
across interrupted-and-resumed runs.
"""

from __future__ import annotations

import json
import math
import os
import platform
import signal
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np

from .averaging import example_thresholds
from .chirp import exponents
from .config import from_dict
from .errors import ConfigError, DomainError, EngineRefusal, NumericError
from .orbit import default_orbit
from .report import clean, dumps, render_partition_png, simulate_config

CELLS_FILE = "cells.jsonl"
SWEEP_POINTS_PER_DECADE = 64
THEORY_ORDERS = (1, 3, 5)

_STATUS_OF = (
    (ConfigError, "config_error"),
    (EngineRefusal, "refused"),
    (NumericError, "numeric_error"),
    (DomainError, "domain_error"),
)


class CellTimeout(Exception):
    pass


def _alarm(signum, frame):
    raise CellTimeout()


def run_cell(task):
    """Worker entry: ``task = (config dict, index, params, timeout)`` -> JSON-ready dict.

    The wall-clock cap uses SIGALRM, so it is checked whenever control is in
    Python; a single compiled integration call finishes before it fires.
    """
    cfg_dict, index, params, timeout = task
    rec = {"index": index, "params": params}
    use_alarm = timeout and hasattr(signal, "SIGALRM")
    if use_alarm:
        old = signal.signal(signal.SIGALRM, _alarm)
        signal.setitimer(signal.ITIMER_REAL, timeout)
    try:
        cfg = from_dict(cfg_dict).with_params(**params)
        record, cls, _, _ = simulate_config(cfg)
        rec.update(status="ok", run_status=record.status, **cls.to_dict())
    except CellTimeout:
        rec.update(status="timeout", error=f"exceeded {timeout} s")
    except Exception as exc:
        status = next((s for cls_, s in _STATUS_OF if isinstance(exc, cls_)), "error")
        rec.update(status=status, error=f"{type(exc).__name__}: {exc}")
    finally:
        if use_alarm:
            signal.setitimer(signal.ITIMER_REAL, 0)
            signal.signal(signal.SIGALRM, old)
    return rec


def _read_done(path, key_prefix):
    """Completed lines of a previous run, dropping a torn trailing line."""
    done = []
    if not path.exists():
        return done
    raw = path.read_bytes()
    keep = raw.rfind(b"\n") + 1
    if keep != len(raw):
        with open(path, "r+b") as fh:
            fh.truncate(keep)
    for n, line in enumerate(raw[:keep].splitlines()):
        try:
            entry = json.loads(line)
        except json.JSONDecodeError:
            raise DomainError(f"{path}: line {n + 1} is not valid JSON") from None
        if not str(entry.get("key", "")).startswith(key_prefix):
            raise ConfigError(f"{path} belongs to a different sweep (key {entry.get('key')!r})", field="sweep")
        if entry.get("index") != n:
            raise DomainError(f"{path}: line {n + 1} holds cell {entry.get('index')}, expected {n}")
        done.append(entry)
    return done


def _cell_line(key_prefix, rec):
    rec = {"key": f"{key_prefix}{rec['index']}", **rec}
    return json.dumps(clean(rec), sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def _cell_config(cfg):
    sim = replace(cfg.simulation, points_per_decade=min(cfg.simulation.points_per_decade, SWEEP_POINTS_PER_DECADE))
    return replace(cfg, simulation=sim, output={})


def run_sweep(cfg, out_dir, jobs=1, resume=False, plots=True, limit=None):
    """Run every grid cell not already on disk and write the sweep summary.

    ``limit`` stops after that many newly computed cells (used to exercise
    resume); the summary is only written once the grid is complete.
    Returns the summary dict, or None when stopped early.
    """
    if cfg.sweep is None:
        raise ConfigError("config has no sweep block", field="sweep")
    grid = cfg.sweep
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / CELLS_FILE
    cell_cfg = _cell_config(cfg)
    key_prefix = f"{cfg.config_hash()}:"
    if resume:
        done = _read_done(path, key_prefix)
    else:
        path.unlink(missing_ok=True)
        done = []
    todo = list(range(len(done), grid.size))
    if limit is not None:
        todo = todo[:limit]
    cfg_dict = cell_cfg.to_dict()
    cfg_dict.pop("sweep", None)
    tasks = [(cfg_dict, i, grid.cell(i), grid.cell_timeout) for i in todo]
    with open(path, "a") as fh:
        if jobs <= 1:
            results = map(run_cell, tasks)
            for rec in results:
                fh.write(_cell_line(key_prefix, rec))
                fh.flush()
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for rec in pool.map(run_cell, tasks, chunksize=1):
                    fh.write(_cell_line(key_prefix, rec))
                    fh.flush()
    cells = _read_done(path, key_prefix)
    if len(cells) < grid.size:
        return None
    return _summarize(cfg, cells, out_dir, plots)


# -- summary and theory overlay ------------------------------------------------

def theory_curve(cfg, orders=THEORY_ORDERS, n=101):
    """Samples of ``B_crit`` along the non-B axis for each resonance order.

    Returns ``{label: (B values, other-axis values)}``; orders the preset
    does not support, or that never lock, are skipped.
    """
    axes = [a[0] for a in cfg.sweep.axes]
    if "B" not in axes:
        return {}
    other = axes[1 - axes.index("B")]
    lo, hi = next((a[1], a[2]) for a in cfg.sweep.axes if a[0] == other)
    ex = cfg.example
    orbit = default_orbit(cfg.potential.h)
    curves = {}
    ks = orders if ex == 1 else (cfg.kappa,)
    ys = np.linspace(lo, hi, n)
    for k in ks:
        Bs = []
        for y in ys:
            c = cfg.with_params(**{other: float(y)})
            setup = exponents(c.perturbation, c.potential, k)
            thr = example_thresholds(ex, orbit, setup, C=c.params.get("C", 1.0))
            Bs.append(thr.B_crit)
        if all(math.isfinite(b) for b in Bs):
            curves[f"kappa={k}"] = (Bs, ys.tolist())
    return curves


def _versions():
    out = {"python": platform.python_version()}
    for pkg in ("numpy", "scipy", "numba"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _summarize(cfg, cells, out_dir, plots):
    axes = [a[0] for a in cfg.sweep.axes]
    curves = theory_curve(cfg)
    summary = {
        "config_hash": cfg.config_hash(),
        "grid": cfg.sweep.to_dict(),
        "cells": [
            {"index": c["index"], "params": c["params"], "status": c["status"],
             "regime": c.get("regime"), "growth_exponent": c.get("growth_exponent"),
             "max_ratio": c.get("max_ratio")}
            for c in cells
        ],
        "theory": {label: {"B": b, axes[1] if axes[0] == "B" else axes[0]: y} for label, (b, y) in curves.items()},
        "provenance": {"config_hash": cfg.config_hash(), "versions": _versions()},
    }
    (out_dir / "sweep.json").write_text(dumps(summary))
    rows = ["index," + ",".join(axes) + ",status,regime"]
    for c in cells:
        p = c["params"]
        rows.append(f"{c['index']},{p[axes[0]]!r},{p[axes[1]]!r},{c['status']},{c.get('regime') or ''}")
    (out_dir / "partition.csv").write_text("\n".join(rows) + "\n")
    curve_rows = ["label,B," + (axes[1] if axes[0] == "B" else axes[0])]
    for label, (b, y) in curves.items():
        curve_rows += [f"{label},{bv!r},{yv!r}" for bv, yv in zip(b, y)]
    (out_dir / "theory_curve.csv").write_text("\n".join(curve_rows) + "\n")
    (out_dir / "partition.gp").write_text(gnuplot_partition_script(axes, list(curves)))
    if plots:
        pts = [(c["params"][axes[0]], c["params"][axes[1]],
                c.get("regime") if c["status"] == "ok" else c["status"]) for c in cells]
        oriented = {}
        for label, (b, y) in curves.items():
            oriented[label] = (b, y) if axes[0] == "B" else (y, b)
        render_partition_png(pts, axes, oriented, out_dir / "partition.png")
    return summary


def gnuplot_partition_script(axes, labels):
    xcol, ycol = ("2", "3") if axes[0] == "B" else ("3", "2")
    lines = [
        "# locked/drifting partition with the threshold curves",
        "set datafile separator ','",
        "set terminal pngcairo size 700,600",
        "set output 'partition_gnuplot.png'",
        f"set xlabel '{axes[0]}'; set ylabel '{axes[1]}'",
        "plot 'partition.csv' using 2:($5 eq 'locked' ? $3 : 1/0) skip 1 with points pt 5 lc rgb 'red' title 'locked', \\",
        "     'partition.csv' using 2:($5 eq 'drifting' ? $3 : 1/0) skip 1 with points pt 5 lc rgb 'blue' title 'drifting'"
        + (", \\" if labels else ""),
    ]
    for n, label in enumerate(labels):
        sep = ", \\" if n < len(labels) - 1 else ""
        lines.append(f"     'theory_curve.csv' using {xcol}:(stringcolumn(1) eq '{label}' ? ${ycol} : 1/0) skip 1 "
                     f"with lines dt 2 lc rgb 'black' title '{label}'{sep}")
    return "\n".join(lines) + "\n"


def boundary_columns(summary, axis_b="B"):
    """Empirical locking boundary per column of the non-B axis.

    For each column the boundary is the smallest B whose cell and every cell
    above it are locked; returns ``[(y, B_emp or None, regimes)]`` in axis order.
    """
    grid = summary["grid"]["axes"]
    names = [a["name"] for a in grid]
    other = names[1 - names.index(axis_b)]
    cols = {}
    for c in summary["cells"]:
        p = c["params"]
        regime = c["regime"] if c["status"] == "ok" else c["status"]
        cols.setdefault(p[other], []).append((p[axis_b], regime))
    out = []
    for y in sorted(cols):
        col = sorted(cols[y])
        b_emp = None
        for b, r in reversed(col):
            if r != "locked":
                break
            b_emp = b
        out.append((y, b_emp, [r for _, r in col]))
    return out


def default_jobs():
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
