"""Run configuration: versioned JSON, validated field by field before any work.

A config names either a built-in preset with its parameters or an explicit
potential plus perturbation table. Only the integrator tolerances may be
overridden from the environment (``AUTORES_RTOL``, ``AUTORES_ATOL``).
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .chirp import PRESET_DEFAULTS, PerturbationSpec, preset, validate
from .errors import ConfigError
from .potential import PotentialSpec
from .simulate import DEFAULT_ATOL, DEFAULT_RTOL, POINTS_PER_DECADE, Thresholds

SCHEMA = "autores.run/1"
ENV_TOLERANCES = {"AUTORES_RTOL": "rtol", "AUTORES_ATOL": "atol"}
MIN_DECADES = 1.5

# example 3 cannot capture before the drag falls under the forcing margin
PRESET_T_START = {"example1": 50.0, "example2": 50.0, "example3": 1000.0}
PRESET_KAPPA = {"example1": 1, "example2": 2, "example3": 2}

_TOP_KEYS = {"schema", "preset", "params", "potential", "perturbation", "kappa",
             "simulation", "analysis", "output", "sweep"}


@dataclass(frozen=True)
class SimulationConfig:
    t_s: float
    t_end: float
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    points_per_decade: int = POINTS_PER_DECADE
    ic_mode: str = "on_resonance"
    dtheta: float = 0.0
    dr: float = 0.0
    x0: float | None = None
    y0: float | None = None

    def to_dict(self):
        ic = {"mode": self.ic_mode}
        if self.ic_mode == "on_resonance":
            ic.update(dtheta=self.dtheta, dr=self.dr)
        else:
            ic.update(x=self.x0, y=self.y0)
        return {"t_s": self.t_s, "t_end": self.t_end, "rtol": self.rtol, "atol": self.atol,
                "points_per_decade": self.points_per_decade, "ic": ic}


@dataclass(frozen=True)
class AnalysisConfig:
    thresholds: Thresholds = Thresholds()
    gamma_D: float | None = None
    D: int | None = None

    def to_dict(self):
        d = {"exponent_tol": self.thresholds.exponent_tol, "circ_std": self.thresholds.circ_std,
             "bound_factor": self.thresholds.bound_factor}
        if self.gamma_D is not None:
            d.update(gamma_D=self.gamma_D, D=self.D)
        return d


@dataclass(frozen=True)
class SweepConfig:
    axes: tuple  # ((name, lo, hi, n), (name, lo, hi, n))
    cell_cap: int = 10_000
    cell_timeout: float = 60.0

    @property
    def shape(self):
        return tuple(ax[3] for ax in self.axes)

    @property
    def size(self):
        return math.prod(self.shape)

    def values(self, axis):
        name, lo, hi, n = self.axes[axis]
        if n == 1:
            return [lo]
        return [lo + (hi - lo) * i / (n - 1) for i in range(n)]

    def cell(self, index):
        """Parameter values of cell ``index`` (row-major, last axis fastest)."""
        n1 = self.axes[1][3]
        i0, i1 = divmod(index, n1)
        return {self.axes[0][0]: self.values(0)[i0], self.axes[1][0]: self.values(1)[i1]}

    def to_dict(self):
        return {"axes": [{"name": n, "min": lo, "max": hi, "n": k} for n, lo, hi, k in self.axes],
                "cell_cap": self.cell_cap, "cell_timeout": self.cell_timeout}


@dataclass(frozen=True)
class RunConfig:
    potential: PotentialSpec
    perturbation: PerturbationSpec
    kappa: int
    simulation: SimulationConfig
    analysis: AnalysisConfig = AnalysisConfig()
    preset: str | None = None
    params: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    sweep: SweepConfig | None = None

    @property
    def example(self):
        """1, 2 or 3 for the built-in presets, else None."""
        return int(self.preset[-1]) if self.preset else None

    def to_dict(self):
        d = {"schema": SCHEMA}
        if self.preset:
            d["preset"] = self.preset
            d["params"] = dict(self.params)
        else:
            d["potential"] = self.potential.to_dict()
            d["perturbation"] = self.perturbation.to_dict()
        d["kappa"] = self.kappa
        d["simulation"] = self.simulation.to_dict()
        d["analysis"] = self.analysis.to_dict()
        if self.output:
            d["output"] = dict(self.output)
        if self.sweep is not None:
            d["sweep"] = self.sweep.to_dict()
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def config_hash(self):
        """Digest of everything that affects results (output paths excluded)."""
        d = self.to_dict()
        d.pop("output", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_params(self, **params):
        """Same config with some preset parameters replaced (used per sweep cell)."""
        if not self.preset:
            raise ConfigError("parameter overrides need a preset", field="preset")
        merged = {**self.params, **params}
        pot, pert = preset(self.preset, **merged)
        return replace(self, params=merged, potential=pot, perturbation=pert, sweep=None)


# -- parsing -------------------------------------------------------------------

def _num(d, key, path, default=None, positive=False, integer=False):
    v = d.get(key, default)
    where = f"{path}.{key}" if path else key
    if v is None:
        if default is None and key in d:
            raise ConfigError("must not be null", field=where)
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"must be a number, got {v!r}", field=where)
    if not math.isfinite(v):
        raise ConfigError(f"must be finite, got {v!r}", field=where)
    if integer:
        if int(v) != v:
            raise ConfigError(f"must be an integer, got {v!r}", field=where)
        v = int(v)
    else:
        v = float(v)
    if positive and v <= 0:
        raise ConfigError(f"must be positive, got {v!r}", field=where)
    return v


def _section(d, key, allowed):
    sec = d.get(key, {})
    if not isinstance(sec, dict):
        raise ConfigError("must be an object", field=key)
    extra = set(sec) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)}", field=key)
    return sec


def _tolerance_env(sim):
    out = dict(sim)
    for var, key in ENV_TOLERANCES.items():
        raw = os.environ.get(var)
        if raw is None:
            continue
        try:
            val = float(raw)
        except ValueError:
            raise ConfigError(f"environment override {var}={raw!r} is not a number", field=f"simulation.{key}") from None
        if not (math.isfinite(val) and val > 0):
            raise ConfigError(f"environment override {var}={raw!r} must be positive", field=f"simulation.{key}")
        out[key] = val
    return out


def _parse_simulation(d, preset_name):
    sim = _tolerance_env(_section(d, "simulation", {"t_s", "t_end", "rtol", "atol", "points_per_decade", "ic"}))
    t_s = _num(sim, "t_s", "simulation", PRESET_T_START.get(preset_name, 50.0), positive=True)
    t_end = _num(sim, "t_end", "simulation", 100.0 * t_s, positive=True)
    if math.log10(t_end / t_s) < MIN_DECADES - 1e-12:
        raise ConfigError(f"needs t_end >= t_s * 10^{MIN_DECADES} for classification, got t_s={t_s}, t_end={t_end}",
                          field="simulation.t_end")
    rtol = _num(sim, "rtol", "simulation", DEFAULT_RTOL, positive=True)
    atol = _num(sim, "atol", "simulation", DEFAULT_ATOL, positive=True)
    ppd = _num(sim, "points_per_decade", "simulation", POINTS_PER_DECADE, positive=True, integer=True)
    ic = sim.get("ic", {"mode": "on_resonance"})
    if not isinstance(ic, dict):
        raise ConfigError("must be an object", field="simulation.ic")
    mode = ic.get("mode", "on_resonance")
    if mode == "on_resonance":
        extra = set(ic) - {"mode", "dtheta", "dr"}
        if extra:
            raise ConfigError(f"unknown key(s) {sorted(extra)}", field="simulation.ic")
        return SimulationConfig(t_s, t_end, rtol, atol, ppd, mode,
                                _num(ic, "dtheta", "simulation.ic", 0.0), _num(ic, "dr", "simulation.ic", 0.0))
    if mode == "explicit":
        extra = set(ic) - {"mode", "x", "y"}
        if extra:
            raise ConfigError(f"unknown key(s) {sorted(extra)}", field="simulation.ic")
        for k in ("x", "y"):
            if k not in ic:
                raise ConfigError("required for explicit initial data", field=f"simulation.ic.{k}")
        return SimulationConfig(t_s, t_end, rtol, atol, ppd, mode,
                                x0=_num(ic, "x", "simulation.ic"), y0=_num(ic, "y", "simulation.ic"))
    raise ConfigError(f"mode must be 'on_resonance' or 'explicit', got {mode!r}", field="simulation.ic.mode")


def _parse_analysis(d):
    an = _section(d, "analysis", {"exponent_tol", "circ_std", "bound_factor", "gamma_D", "D"})
    th = Thresholds(
        _num(an, "exponent_tol", "analysis", Thresholds.exponent_tol, positive=True),
        _num(an, "circ_std", "analysis", Thresholds.circ_std, positive=True),
        _num(an, "bound_factor", "analysis", Thresholds.bound_factor, positive=True),
    )
    g = _num(an, "gamma_D", "analysis")
    D = _num(an, "D", "analysis", integer=True)
    if (g is None) != (D is None):
        raise ConfigError("gamma_D and D must be given together", field="analysis.D")
    if D is not None and D < 1:
        raise ConfigError(f"must be >= 1, got {D}", field="analysis.D")
    return AnalysisConfig(th, g, D)


def _parse_sweep(d, preset_name):
    if "sweep" not in d:
        return None
    sw = _section(d, "sweep", {"axes", "cell_cap", "cell_timeout"})
    if not preset_name:
        raise ConfigError("sweeps are defined over preset parameters", field="sweep")
    axes = sw.get("axes")
    if not isinstance(axes, list) or len(axes) != 2:
        raise ConfigError("needs exactly two axes", field="sweep.axes")
    parsed = []
    for n, ax in enumerate(axes):
        where = f"sweep.axes[{n}]"
        if not isinstance(ax, dict) or set(ax) != {"name", "min", "max", "n"}:
            raise ConfigError("each axis needs exactly name, min, max, n", field=where)
        name = ax["name"]
        if name not in PRESET_DEFAULTS[preset_name]:
            raise ConfigError(f"{preset_name} has no parameter {name!r}", field=f"{where}.name")
        lo, hi = _num(ax, "min", where), _num(ax, "max", where)
        k = _num(ax, "n", where, positive=True, integer=True)
        if hi < lo:
            raise ConfigError("max must not be below min", field=f"{where}.max")
        parsed.append((name, float(lo), float(hi), k))
    if parsed[0][0] == parsed[1][0]:
        raise ConfigError("axes must name different parameters", field="sweep.axes")
    cap = _num(sw, "cell_cap", "sweep", 10_000, positive=True, integer=True)
    timeout = _num(sw, "cell_timeout", "sweep", 60.0, positive=True)
    cfg = SweepConfig(tuple(parsed), cap, float(timeout))
    if cfg.size > cap:
        raise ConfigError(f"{cfg.size} cells exceed the cap of {cap}", field="sweep.axes")
    return cfg


def from_dict(d):
    """Validate a decoded config and build a :class:`RunConfig`."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    d = copy.deepcopy(d)
    if d.get("schema") != SCHEMA:
        raise ConfigError(f"expected {SCHEMA!r}, got {d.get('schema')!r}", field="schema")
    extra = set(d) - _TOP_KEYS
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)}")
    name = d.get("preset")
    if name is not None:
        if "potential" in d or "perturbation" in d:
            raise ConfigError("give either a preset or an explicit potential/perturbation, not both", field="preset")
        if name not in PRESET_DEFAULTS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESET_DEFAULTS)}", field="preset")
        params = d.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("must be an object", field="params")
        for k in params:
            _num(params, k, "params")
        params = {**PRESET_DEFAULTS[name], **{k: float(v) for k, v in params.items()}}
        pot, pert = preset(name, **params)
    else:
        if "params" in d:
            raise ConfigError("parameters need a preset", field="params")
        for key in ("potential", "perturbation"):
            if not isinstance(d.get(key), dict):
                raise ConfigError("required object (or use a preset)", field=key)
        try:
            pot = PotentialSpec.from_dict(d["potential"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), field="potential") from None
        pert = PerturbationSpec.from_dict(d["perturbation"])
        params = {}
    validate(pert, pot)
    kappa = _num(d, "kappa", "", PRESET_KAPPA.get(name, 1), positive=True, integer=True)
    out = d.get("output", {})
    if not isinstance(out, dict) or not all(isinstance(v, str) for v in out.values()):
        raise ConfigError("must map names to path strings", field="output")
    return RunConfig(
        pot, pert, kappa, _parse_simulation(d, name), _parse_analysis(d),
        name, params, out, _parse_sweep(d, name),
    )


def loads(text):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return from_dict(d)


def load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text)


def preset_config(name, kappa=None, t_s=None, t_end=None, **params):
    """Programmatic shortcut for a preset run with default analysis settings."""
    d = {"schema": SCHEMA, "preset": name, "params": params, "simulation": {}}
    if kappa is not None:
        d["kappa"] = kappa
    if t_s is not None:
        d["simulation"]["t_s"] = t_s
    if t_end is not None:
        d["simulation"]["t_end"] = t_end
    return from_dict(d)
