"""The ten acceptance criteria, each at its stated tolerance.

Every test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".
"""

import filecmp
import math
import time

import numpy as np
import pytest

import oracles
from helpers import HIDDEN, curve_distance, start
from qhj import (CATALOG_STATES, BoundState, ClassicalParams, EjectionKind, EventKind, HiddenVariables,
                 IntegratorConfig, PurelyQuantumError, TrajectoryState, classical_orbit, classify_ejection,
                 detect_nodes, hidden_ensemble, integrate_spatial_orbit, integrate_time_trajectory, trap_zone,
                 verify_component_qshje, verify_full_qshje)
from qhj.basis import radial_pair
from qhj.classical_dynamics import angular_momentum_vector, closure_gap, planarity, turning_radii
from qhj.figures import FIGURE_IDS, emit_figure_bundle
from qhj.quantum_dynamics import zone_roots
from qhj.residuals import law_of_motion_residual

SEED = 20240611
N_DRAWS = 10
PERIODS = 5
LONG = IntegratorConfig(t_end=1e7, radial_periods=PERIODS)


def _reversals(tr):
    return len(tr.events_of(EventKind.RADIAL_TURN, EventKind.ORIGIN_APPROACH))


@pytest.fixture(scope="module")
def ensembles():
    """Ten draws per catalog state over five radial periods, with the wall time."""
    t0 = time.perf_counter()
    out = {}
    for state in CATALOG_STATES:
        out[state] = [integrate_time_trajectory(state, h, start(state), LONG)
                      for h in hidden_ensemble(N_DRAWS, SEED)]
    return out, time.perf_counter() - t0


def test_criterion_01_trapping_radii(report_criterion):
    expected = {
        BoundState(1, 0, 0): (oracles.PAPER_R2_100,),
        BoundState(2, 0, 0): (oracles.PAPER_R2_200,),
        BoundState(2, 1, 0): (oracles.PAPER_PERIHELION, oracles.PAPER_APHELION),
        BoundState(2, 1, 1): (oracles.PAPER_PERIHELION, oracles.PAPER_APHELION),
    }
    t0 = time.perf_counter()
    zones = {s: trap_zone(s) for s in expected}
    elapsed = time.perf_counter() - t0
    worst = max(abs(got - want) / want for s, want in expected.items() for got, want in zip(zones[s].roots, want))
    ok = worst < 1e-9 and elapsed < 1.0 and all(len(zones[s].roots) == len(expected[s]) for s in expected)
    assert report_criterion(1, "trapping radii", ok, f"max rel err {worst:.2e} (tol 1e-9), {elapsed:.3f} s (< 1 s)")


def test_criterion_02_confinement(ensembles, report_criterion):
    runs, elapsed = ensembles
    worst, incomplete = 0.0, 0
    for state, trajs in runs.items():
        r1, r2 = zone_roots(state)
        for tr in trajs:
            worst = max(worst, r1 - tr.r.min(), tr.r.max() - r2)
            incomplete += tr.status != "complete" or _reversals(tr) < 2 * PERIODS
    ok = worst <= 1e-6 and incomplete == 0 and elapsed < 30.0
    assert report_criterion(2, "confinement", ok,
                            f"max excursion {worst:.2e} a0 (tol 1e-6), {incomplete} short runs, "
                            f"{len(runs) * N_DRAWS} runs in {elapsed:.1f} s (< 30 s)")


def test_criterion_03_turning_nodes(ensembles, report_criterion):
    runs, _ = ensembles
    worst, mismatched = 0.0, []
    for state, trajs in runs.items():
        roots = list(trap_zone(state).roots)
        if state.l == 0:
            roots = [0.0] + roots
        common = sorted(n.r for n in detect_nodes(trajs, node_tol=1e-6).common(1.0))
        if len(common) != len(roots):
            mismatched.append(state.label)
            continue
        worst = max(worst, max(abs(a - b) for a, b in zip(common, roots)))
    ok = not mismatched and worst < 1e-6
    assert report_criterion(3, "turning-point nodes", ok,
                            f"max |cluster - root| {worst:.2e} a0 (tol 1e-6), mismatched states {mismatched}")


def test_criterion_04_qshje_residuals(report_criterion):
    worst, failed = 0.0, 0
    for state in CATALOG_STATES:
        for h in hidden_ensemble(5, SEED + 1):
            reps = verify_component_qshje(state, h, tolerance=1e-5) + [verify_full_qshje(state, h, tolerance=1e-5)]
            worst = max(worst, max(r.max_abs for r in reps))
            failed += sum(not r.passed for r in reps)
    control = []
    for state in CATALOG_STATES:
        bad = radial_pair(state).with_s2_scaled(1.01)
        control.append(verify_component_qshje(state, HIDDEN, radial_pair=bad, tolerance=1e-5)[0])
    control_ok = all(not r.passed for r in control)
    ok = failed == 0 and worst < 1e-5 and control_ok
    assert report_criterion(4, "QSHJE residuals", ok,
                            f"max residual {worst:.2e} (tol 1e-5) over 20 draws; 1% wronskian control "
                            f"min residual {min(r.max_abs for r in control):.2e} fails: {control_ok}")


def test_criterion_05_law_identity(ensembles, report_criterion):
    runs, _ = ensembles
    law = max(float(np.max(np.abs(law_of_motion_residual(tr, s, tr.hidden)))) for s, trs in runs.items() for tr in trs)
    third = 0.0
    for state in CATALOG_STATES:
        for h in hidden_ensemble(3, SEED + 2):
            sp = integrate_spatial_orbit(state, h, start(state), IntegratorConfig(t_end=1e9), segments=2)
            third = max(third, float(sp.extra["eq80_residual"].max()))
    ok = law < 1e-6 and third < 1e-5
    assert report_criterion(5, "quantum law identity", ok,
                            f"law of motion {law:.2e} (tol 1e-6 rel), third relation {third:.2e} (tol 1e-5)")


def test_criterion_06_classical_limit(report_criterion):
    p = ClassicalParams.figure1()
    r1, r2 = turning_radii(p)
    init = TrajectoryState(r=r1, theta=0.5 * math.pi)
    tr = classical_orbit(p, init, IntegratorConfig(t_end=1e4, radial_periods=1))
    gap = closure_gap(tr)
    flat = planarity(tr, angular_momentum_vector(p, init))
    turns = [e.r for e in tr.events_of(EventKind.RADIAL_TURN)]
    peri = max(abs(r1 - oracles.PAPER_PERIHELION), abs(min(turns) - oracles.PAPER_PERIHELION))
    aph = max(abs(r2 - oracles.PAPER_APHELION), abs(max(turns) - oracles.PAPER_APHELION))
    ok = gap < 1e-6 and flat < 1e-8 and peri < 1e-8 and aph < 1e-8
    assert report_criterion(6, "classical limit", ok,
                            f"closure {gap:.2e} (tol 1e-6), planarity {flat:.2e} (tol 1e-8), "
                            f"perihelion err {peri:.2e}, aphelion err {aph:.2e} (tol 1e-8)")


def test_criterion_07_ejection(report_criterion):
    state, h = BoundState(1, 0, 0), HiddenVariables(1.5, -0.5, 1.0, 0.0, 1.0, 0.0)
    # the ejection event stops exactly on its radius, so put it past 100 to test r > 100 strictly
    out = classify_ejection(state, h, 2.1, IntegratorConfig(ejection_radius=101.0))
    r = out.trajectory.r
    monotone = bool(np.all(np.diff(r) > 0))
    inside = classify_ejection(state, h, 1.0)
    ok = (out.kind is EjectionKind.EJECTED and monotone and r.max() > 100.0
          and inside.kind is EjectionKind.TRAPPED and inside.trajectory.r.max() <= 2.0 + 1e-6)
    assert report_criterion(7, "ejection", ok,
                            f"r0=2.1: {out}, monotone {monotone}, r_max {r.max():.6g}; r0=1.0: {inside}, "
                            f"r_max {inside.trajectory.r.max():.10g}")


def test_criterion_08_purely_quantum(report_criterion):
    refused = []
    for state in CATALOG_STATES:
        if state.m_l != 0:
            continue
        try:
            ClassicalParams.from_quantum(state)
        except PurelyQuantumError as exc:
            refused.append("< 0" in str(exc) and "beta^2" in str(exc))
    ok = refused == [True, True, True] and ClassicalParams.from_quantum(BoundState(2, 1, 1)).beta > 0
    assert report_criterion(8, "purely quantum diagnostic", ok, f"{sum(refused)}/3 m_l = 0 states refused")


def test_criterion_09_spatial_vs_time(report_criterion):
    worst = {}
    for state in CATALOG_STATES:
        cfg = IntegratorConfig(t_end=1e9, radial_periods=1)
        tt = integrate_time_trajectory(state, HIDDEN, start(state), cfg)
        sp = integrate_spatial_orbit(state, HIDDEN, start(state), cfg, segments=2)
        d = curve_distance(tt.dense_curve(64), np.column_stack([sp.r, sp.theta, sp.psi]))
        worst[state.label] = float(d.max())
    ok = max(worst.values()) < 1e-5
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert report_criterion(9, "spatial vs time orbits", ok, f"max distance {detail} (tol 1e-5)")


def test_criterion_10_figure_regeneration(tmp_path, report_criterion):
    t0 = time.perf_counter()
    first, second = tmp_path / "a", tmp_path / "b"
    files = {}
    for out in (first, second):
        files[out] = [p.name for fid in FIGURE_IDS for p in emit_figure_bundle(fid, out)]
    elapsed = time.perf_counter() - t0
    same_names = files[first] == files[second]
    match, mismatch, errors = filecmp.cmpfiles(first, second, files[first], shallow=False)
    ok = same_names and not mismatch and not errors and elapsed < 120.0
    assert report_criterion(10, "figure regeneration", ok,
                            f"{len(match)} files byte-identical, {len(mismatch)} differ, "
                            f"{elapsed:.1f} s for two full runs (< 120 s)")
