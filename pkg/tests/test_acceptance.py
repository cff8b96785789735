"""Acceptance criteria 1-10, each at its stated tolerance.

Every test reports one PASS/FAIL line (collected again in the terminal
summary). The 20x20 boundary sweep is marked slow.
"""

import itertools
import math
import time
from dataclasses import replace

import numpy as np
import pytest

import oracles
from autores.averaging import averaged_drift, decide, example_gamma, example_thresholds, stability_verdict
from autores.chirp import exponents, preset
from autores.config import SCHEMA, from_dict, preset_config
from autores.orbit import default_orbit, flow, fourier_spectrum, from_energy_angle, sech_coefficients, to_energy_angle
from autores.potential import PotentialSpec, eval_hamiltonian, frequency, kappa_constant, omega_asym, period
from autores.report import simulate_config
from autores.simulate import contraction_probe
from autores.sweep import boundary_columns, default_jobs, run_sweep


def circ_gap(a, b, period):
    return abs(math.remainder(a - b, period))


def test_c01_kappa_and_omega0(criterion):
    kq = kappa_constant(2)
    kc = oracles.kappa_h2()
    w0 = omega_asym(PotentialSpec.duffing(), default_orbit(2)).omega0
    ok = abs(kq - kc) < 1e-9 and abs(kq - 5.24412) < 5e-6 and abs(w0 - 2 * math.pi / kq) < 1e-14
    criterion(1, ok, f"kappa {kq:.12f} vs closed form {kc:.12f}, omega0 {w0:.10f}")


def test_c02_fourier_coefficients(criterion):
    orbit = default_orbit(2)
    xj = fourier_spectrum(orbit)[:4]
    ref = sech_coefficients(oracles.kappa_h2(), 4)
    worst = float(np.max(np.abs(xj / ref - 1)))
    criterion(2, worst < 1e-6, f"x_1..x_4 = {np.array2string(xj, precision=7)}, worst relative error {worst:.1e}")


def test_c03_thresholds(criterion):
    orbit = default_orbit(2)
    pot, pert = preset("example1", s=0.75)
    b1 = example_thresholds(1, orbit, exponents(pert, pot, 1)).B_crit
    pot, pert = preset("example2", s=1.0)
    b2 = example_thresholds(2, orbit, exponents(pert, pot, 2)).B_crit
    pot, pert = preset("example3", s=1.0, C=1.0)
    b3 = example_thresholds(3, orbit, exponents(pert, pot, 2), C=1.0).B_crit
    ok = abs(b1 - 1.15) <= 0.01 and abs(b2 - 1.24) <= 0.01 and abs(b3 - 0.71) <= 0.02
    criterion(3, ok, f"B1(0.75) = {b1:.5f}, B2(ex2) = {b2:.5f}, B2(ex3) = {b3:.5f}")


def test_c04_growth_law(criterion):
    cfg = preset_config("example1", t_s=50.0, t_end=5000.0, B=2.0, s=0.75)
    start = time.perf_counter()
    rec, cls, setup, drift = simulate_config(cfg)
    elapsed = time.perf_counter() - start
    d1 = example_thresholds(1, default_orbit(2), setup).d
    phi0 = -math.asin(0.75**2 / (2.0 * d1))
    gap = circ_gap(cls.phi0_estimate, phi0, 2 * math.pi)
    ok = (cls.regime == "locked" and abs(cls.growth_exponent / (4 / 3) - 1) <= 0.05
          and abs(cls.growth_prefactor / 0.485 - 1) <= 0.05 and gap <= 0.05)
    criterion(4, ok, f"exponent {cls.growth_exponent:.4f}, prefactor {cls.growth_prefactor:.4f}, "
                     f"theta gap {gap:.4f} rad ({elapsed:.1f} s)")


@pytest.mark.parametrize("B", [0.0, 0.8])
def test_c05_dichotomy(criterion, B):
    cfg = preset_config("example1", t_s=50.0, t_end=5000.0, B=B, s=0.75)
    rec, cls, _, _ = simulate_config(cfg)
    ok = cls.regime == "drifting" and cls.max_ratio < 3
    criterion(5, ok, f"B = {B}: {cls.regime}, max I / I(t_s) = {cls.max_ratio:.3f}")


def test_c06_example3_capture(criterion):
    # the drag outweighs the forcing margin before t ~ 650, so the run starts at 1000
    cfg = preset_config("example3", t_s=1000.0, t_end=1000.0 * 10**1.6, B=1.2, s=1.0, C=1.0)
    start = time.perf_counter()
    rec, cls, setup, _ = simulate_config(cfg)
    elapsed = time.perf_counter() - start
    ok = (cls.regime == "locked" and abs(cls.growth_exponent / (4 / 3) - 1) <= 0.05
          and abs(cls.growth_prefactor / 0.095 - 1) <= 0.10
          and abs(cls.growth_prefactor / setup.growth_prefactor - 1) <= 0.10)
    criterion(6, ok, f"{cls.regime}, exponent {cls.growth_exponent:.4f}, prefactor {cls.growth_prefactor:.4f} "
                     f"(c2^-4 = {setup.growth_prefactor:.4f}) ({elapsed:.1f} s)")


def probe(name, kappa, t_s, t_end, **params):
    orbit = default_orbit(2)
    pot, pert = preset(name, **params)
    setup = exponents(pert, pot, kappa)
    drift = averaged_drift(pert, pot, orbit, setup)
    gamma, D = example_gamma(int(name[-1]), orbit, setup, params.get("C", 1.0))
    verdict = stability_verdict(drift, setup, gamma, D)
    res = contraction_probe(pot, pert, setup, drift, verdict, t_s, t_end)
    return verdict, res


def test_c07_contraction_probe(criterion):
    v1, r1 = probe("example1", 1, 50.0, 5000.0, B=2.0, s=0.75)
    span1 = math.log10(r1.tau[-1] / r1.tau[0])
    ok1 = v1.regime == "poly_stable" and not r1.escaped and -0.4 <= r1.exponent <= -0.1 and span1 >= 1.5
    v3, r3 = probe("example3", 2, 1000.0, 1000.0 * 10**1.6, B=1.2, s=1.0, C=1.0)
    span3 = math.log10(r3.tau[-1] / r3.tau[0])
    ok3 = (v3.regime == "exp_stable" and not r3.escaped and r3.late_slope < r3.early_slope < 0
           and r3.stretched_rms < r3.power_rms and r3.stretched_slope < 0 and span3 >= 1.5)
    criterion(7, ok1 and ok3,
              f"ex1 W0 slope {r1.exponent:.3f} (predicted {v1.predicted_contraction_exponent}) over {span1:.2f} "
              f"tau-decades; ex3 local slopes {r3.early_slope:.2f} -> {r3.late_slope:.2f}, "
              f"rms power {r3.power_rms:.3f} vs tau^{v3.stretch_power} {r3.stretched_rms:.3f}")


def test_c08_transform_fidelity(criterion):
    pot = PotentialSpec.duffing()
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        E = 10 ** rng.uniform(-2, 4)
        phi = rng.uniform(0, 2 * math.pi)
        x, y = from_energy_angle(pot, E, phi)
        E2, phi2 = to_energy_angle(pot, x, y)
        worst = max(worst, abs(E2 - E) / E, abs(math.remainder(phi2 - phi, 2 * math.pi)))
    jac = 0.0
    for E, phi in ((0.3, 1.0), (5.0, 4.0), (800.0, 2.5)):
        dE, dp = 1e-5 * E, 1e-5
        pa, pb = from_energy_angle(pot, E + dE, phi), from_energy_angle(pot, E - dE, phi)
        pc, pd = from_energy_angle(pot, E, phi + dp), from_energy_angle(pot, E, phi - dp)
        det = ((pa[0] - pb[0]) * (pc[1] - pd[1]) - (pa[1] - pb[1]) * (pc[0] - pd[0])) / (4 * dE * dp)
        jac = max(jac, abs(abs(det) * frequency(pot, E) - 1))
    cons = 0.0
    for E in (0.1, 10.0, 1e4):
        T = period(pot, E)
        x0, _ = from_energy_angle(pot, E, 0.0)
        out = flow(pot, x0, 0.0, T * np.arange(1, 11), rtol=1e-12)
        cons = max(cons, float(np.max(np.abs(eval_hamiltonian(pot, out[:, 0], out[:, 1]) / E - 1))) / 10)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-9 and jac < 1e-6 and cons < 1e-9 and elapsed < 30
    criterion(8, ok, f"round trip {worst:.1e}, Jacobian {jac:.1e}, energy drift {cons:.1e}/period ({elapsed:.1f} s)")


@pytest.mark.slow
def test_c09_boundary_sweep(criterion, tmp_path):
    d = {
        "schema": SCHEMA, "preset": "example1", "params": {"B": 2.0, "s": 0.75},
        "sweep": {"axes": [{"name": "B", "min": 0.2, "max": 3.0, "n": 20},
                           {"name": "s", "min": 0.4, "max": 1.2, "n": 20}],
                  "cell_timeout": 300},
    }
    cfg = from_dict(d)
    start = time.perf_counter()
    summary = run_sweep(cfg, tmp_path, jobs=default_jobs())
    elapsed = time.perf_counter() - start
    orbit = default_orbit(2)
    cell = (3.0 - 0.2) / 19
    hits = misses = 0
    worst = []
    for s, b_emp, regimes in boundary_columns(summary):
        pot, pert = preset("example1", s=s)
        b1 = example_thresholds(1, orbit, exponents(pert, pot, 1)).B_crit
        if not 0.2 <= b1 <= 3.0:
            continue
        if b_emp is not None and abs(b_emp - b1) <= cell:
            hits += 1
        else:
            misses += 1
            worst.append((round(s, 3), b_emp, round(b1, 3)))
    frac = hits / (hits + misses)
    criterion(9, frac >= 0.9, f"{hits}/{hits + misses} columns within one cell of B1(s) "
                              f"({elapsed / 60:.1f} min){'; misses ' + str(worst) if worst else ''}")


# the stability statements and their preconditions, one entry each
STATEMENTS = {
    "unstable_saddle": lambda lam, g, md, L, N: lam > 0,
    "unstable_gammaD": lambda lam, g, md, L, N: lam < 0 and g > 0,
    "exp_stable": lambda lam, g, md, L, N: lam < 0 and g < 0 and md == "<",
    "poly_stable": lambda lam, g, md, L, N: lam < 0 and md == "=" and g < 0 and g + L / N < 0,
    "stable": lambda lam, g, md, L, N: lam < 0 and g < 0 and md == ">" and L == 0,
    "finite_time_stable": lambda lam, g, md, L, N: lam < 0 and g < 0 and (
        (md == "=" and g + L / N >= 0) or (md == ">" and L > 0)),
}


def test_c10_classifier_totality(criterion):
    N, M = 8, 4
    cells = 0
    bad = []
    seen = set()
    for lam, g, md, L in itertools.product((-0.4, 0.4), (-0.3, -0.1, 0.3), "<=>", (0, 1, 2, 3, 4)):
        D = {"<": 3, "=": 4, ">": 5}[md]
        hits = [k for k, pred in STATEMENTS.items() if pred(lam, g, md, L, N)]
        got = decide(lam, g, M, D, N, L)
        cells += 1
        seen.add(got)
        if hits != [got]:
            bad.append((lam, g, md, L, hits, got))
    ok = not bad and seen == set(STATEMENTS)
    criterion(10, ok, f"{cells} lattice cells, one verdict each, {len(seen)} regimes reached"
                      + (f"; mismatches {bad}" if bad else ""))
