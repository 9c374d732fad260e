"""Property-based checks of the invariants."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from qhj import CATALOG_STATES, HiddenVariables, ResidualReport, TrajectoryState, qshje_residual, velocity_field
from qhj.analysis import trap_zone
from qhj.fileio import thin_indices
from qhj.momenta import azimuthal_angle, components
from qhj.quantum_dynamics import Event, EventKind, Trajectory
from qhj.units import from_internal, to_internal

states = st.sampled_from(CATALOG_STATES)
nonzero = st.floats(0.2, 3.0).flatmap(lambda a: st.sampled_from([a, -a]))
offset = st.floats(-2.0, 2.0)
hidden = st.builds(HiddenVariables, nonzero, offset, nonzero, offset, nonzero, offset,
                   st.sampled_from([1, -1]), st.sampled_from([1, -1]), st.sampled_from([1, -1]))
signs = st.tuples(*[st.sampled_from([1, -1])] * 3)
radius = st.floats(0.05, 30.0)
polar = st.floats(0.05, math.pi - 0.05)
azim = st.floats(0.0, 2 * math.pi)


@settings(max_examples=150, deadline=None)
@given(states, hidden, signs, radius, polar, azim)
def test_component_equations_hold_everywhere(state, h, sg, r, t, p):
    cz, cl, cm = components(state, h, sg)
    for comp, q in ((cz, r), (cl, t), (cm, p)):
        res = qshje_residual(comp, q, state)
        scale = 1.0 + abs(comp.momentum(q)) ** 2 + abs(comp.schwarzian(q))
        assert abs(res) / scale < 1e-9


@settings(max_examples=150, deadline=None)
@given(states, hidden, signs, radius, polar, azim)
def test_momentum_sign_and_numerator(state, h, sg, r, t, p):
    for comp, q in zip(components(state, h, sg), (r, t, p)):
        D = comp.parts(q)[4]
        assert D > 0
        pq = comp.momentum(q)
        assert np.sign(pq) == comp.sign * np.sign(comp.a)
        assert math.isclose(pq * D, comp.sign * comp.a, rel_tol=1e-12)


@settings(max_examples=150, deadline=None)
@given(states, hidden, signs, radius, polar, azim)
def test_law_of_motion_at_any_point(state, h, sg, r, t, p):
    v = np.asarray(velocity_field(state, h, TrajectoryState(0.0, r, t, p, sg)))
    cz, cl, cm = components(state, h, sg)
    mom = np.array([cz.momentum(r), cl.momentum(t), cm.momentum(p)])
    rhs = 2.0 * (state.E + 1.0 / r)
    assert abs(v @ mom - rhs) <= 1e-10 * (np.abs(v * mom).sum() + abs(rhs))


@settings(max_examples=100, deadline=None)
@given(states, hidden, st.sampled_from([1, -1]), st.floats(0.01, 12.0))
def test_azimuthal_inverse(state, h, sg, p):
    cm = components(state, h, (1, 1, sg))[2]
    if state.m_l == 0:
        p = p - 6.0
    assert abs(azimuthal_angle(cm, cm.reduced_action(p)) - p) < 1e-9 * (1 + abs(p))


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50), st.floats(1e-12, 1e3))
def test_report_pass_iff_within_tolerance(values, tol):
    rep = ResidualReport.from_values("p", "g", values, tol)
    assert rep.passed == (max(abs(v) for v in values) <= tol)
    assert rep.rms <= rep.max_abs + 1e-12


@given(states, st.floats(1e-3, 60.0))
def test_trap_zone_sign_of_kinetic_term(state, r):
    z = trap_zone(state)
    inside = state.E + 1.0 / r - state.lam / (2 * r * r) > 0
    if min(abs(r - z.r1), abs(r - z.r2)) > 1e-9:
        assert bool(z.contains(r)) == inside


@given(st.integers(5, 3000), st.integers(1, 500), st.lists(st.floats(0.0, 1.0), max_size=20))
def test_thinning_keeps_events(n, rows, fracs):
    t = np.linspace(0.0, 1.0, n)
    events = [Event(float(t[int(f * (n - 1))]), EventKind.RADIAL_TURN, 1.0, 1.0, 0.0) for f in fracs]
    z = np.zeros(n)
    tr = Trajectory(t, z + 1, z + 1, z, events, np.ones((n, 3), int), np.zeros((n, 3)))
    idx = thin_indices(tr, rows)
    assert np.all(np.diff(idx) > 0) and idx[0] == 0 and idx[-1] == n - 1
    kept = set(t[idx].tolist())
    assert all(e.t in kept for e in events)
    if n > rows:
        assert len(idx) <= rows + len(events) + 2


@given(st.floats(1e-30, 1e30), st.sampled_from(["length", "time", "energy"]))
def test_unit_round_trip(x, kind):
    assert math.isclose(from_internal(to_internal(x, kind), kind), x, rel_tol=1e-14)
