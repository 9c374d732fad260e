import math
from dataclasses import replace

import numpy as np
import pytest

import oracles
from helpers import HIDDEN, start
from qhj import (CATALOG_STATES, BoundState, EventKind, HiddenVariables, IntegrationStall, IntegratorConfig,
                 TrajectoryState, angular_trajectory, integrate_spatial_orbit, integrate_time_trajectory,
                 velocity_field)
from qhj.momenta import components
from qhj.quantum_dynamics import polar_root, reverse_state, zone_roots

GROUND = BoundState(1, 0, 0)


def test_state_and_config_validation():
    with pytest.raises(ValueError):
        TrajectoryState(r=0.0)
    with pytest.raises(ValueError):
        TrajectoryState(theta=math.pi)
    with pytest.raises(ValueError):
        TrajectoryState(signs=(1, 0, 1))
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(max_step=-1.0)


def test_zone_roots_and_polar_root():
    assert zone_roots(GROUND) == (0.0, 2.0)
    r1, r2 = zone_roots(BoundState(2, 1, 0))
    assert r1 == pytest.approx(oracles.DERIVED_R1_21X, rel=1e-14)
    assert r2 == pytest.approx(oracles.DERIVED_R2_21X, rel=1e-14)
    assert polar_root(BoundState(2, 1, 1)) == pytest.approx(oracles.DERIVED_THETA_STAR_211, rel=1e-14)
    assert polar_root(BoundState(2, 1, 0)) is None


def test_time_to_outer_turn_matches_quadrature():
    h = HiddenVariables(0.36, 0.52, 1.0, 0.0, 1.0, 0.0)
    tr = integrate_time_trajectory(GROUND, h, TrajectoryState(r=1.0), IntegratorConfig(t_end=50, radial_periods=1))
    turn = tr.events_of(EventKind.RADIAL_TURN)[0]
    assert turn.t == pytest.approx(oracles.DERIVED_T_TURN_100, rel=1e-9)
    assert turn.r == pytest.approx(2.0, abs=1e-8)


def test_time_to_ejection_matches_quadrature():
    h = HiddenVariables(1.5, -0.5, 1.0, 0.0, 1.0, 0.0)
    tr = integrate_time_trajectory(GROUND, h, TrajectoryState(r=2.1), IntegratorConfig(t_end=50))
    assert tr.status == "ejected"
    ev = tr.events_of(EventKind.EJECTION)[0]
    assert ev.t == pytest.approx(oracles.DERIVED_T_EJECT_100, rel=1e-8)
    assert ev.r == pytest.approx(100.0, rel=1e-9)


@pytest.mark.parametrize("state", CATALOG_STATES, ids=lambda s: s.label)
def test_trajectory_structure(state):
    tr = integrate_time_trajectory(state, HIDDEN, start(state), IntegratorConfig(t_end=1e4, radial_periods=2))
    assert tr.status == "complete" and tr.mode == "time"
    assert np.all(np.diff(tr.t) > 0)
    assert [e.t for e in tr.events] == sorted(e.t for e in tr.events)
    r1, r2 = zone_roots(state)
    assert tr.r.min() >= r1 - 1e-6 and tr.r.max() <= r2 + 1e-6
    assert len(tr.events_of("RadialTurn")) + len(tr.events_of("OriginApproach")) >= 4
    assert np.all((tr.theta > 0) & (tr.theta < math.pi))


def test_radial_sign_flips_at_turns():
    state = BoundState(2, 1, 0)
    tr = integrate_time_trajectory(state, HIDDEN, start(state), IntegratorConfig(t_end=1e4, radial_periods=1))
    turns = [e for e in tr.events_of(EventKind.RADIAL_TURN) if e.t < tr.t[-1] - 1e-6]
    assert turns
    for e in turns:
        before = tr.velocity[tr.t < e.t - 1e-9][-1, 0]
        after = tr.velocity[tr.t > e.t + 1e-9][0, 0]
        assert before * after < 0


def test_initial_directions_follow_hidden_signs():
    state = BoundState(2, 1, 1)
    for sr, st in ((1, 1), (-1, -1), (1, -1)):
        h = replace(HIDDEN, sign_r=sr, sign_theta=st)
        v = velocity_field(state, h, start(state))
        tr = integrate_time_trajectory(state, h, start(state), IntegratorConfig(t_end=1e-3))
        assert np.sign(tr.velocity[0, 0]) == sr and np.sign(tr.velocity[0, 1]) == st
        assert np.sign(v[0]) in (1, -1)


def test_velocity_matches_momenta():
    state = BoundState(2, 1, 1)
    x = TrajectoryState(r=3.0, theta=1.2, phi=0.4, signs=(1, -1, 1))
    v = np.asarray(velocity_field(state, HIDDEN, x))
    cz, cl, cm = components(state, HIDDEN, x.signs)
    p = np.array([cz.momentum(3.0), cl.momentum(1.2), cm.momentum(0.4)])
    w = np.array([1.0, 9.0, 9.0 * math.sin(1.2) ** 2])
    # velocity and momentum are parallel coordinate by coordinate
    assert np.all(np.sign(v * w) == np.sign(p))
    lhs = float(np.dot(v, p))
    assert lhs == pytest.approx(2.0 * (state.E + 1.0 / 3.0), rel=1e-10)


def test_dense_output_reproduces_samples():
    state = BoundState(2, 0, 0)
    tr = integrate_time_trajectory(state, HIDDEN, start(state), IntegratorConfig(t_end=1e4, radial_periods=1))
    got = tr.at_time(tr.t[::7])
    assert np.allclose(got[:, 0], tr.r[::7], rtol=1e-12, atol=1e-12)
    assert np.allclose(got[:, 1], tr.theta[::7], rtol=1e-12, atol=1e-12)
    curve = tr.dense_curve(8)
    assert curve.shape[1] == 3 and len(curve) > 8 * len(tr.t) // 2
    assert np.allclose(curve[0, :2], [tr.r[0], tr.theta[0]], rtol=1e-12)
    assert np.allclose(curve[-1, :2], [tr.r[-1], tr.theta[-1]], rtol=1e-9, atol=1e-12)


def test_stall_keeps_partial_trajectory():
    cfg = IntegratorConfig(t_end=1e4, radial_periods=2, max_steps=5)
    with pytest.raises(IntegrationStall) as info:
        integrate_time_trajectory(BoundState(2, 1, 0), HIDDEN, start(BoundState(2, 1, 0)), cfg)
    assert info.value.trajectory is not None and len(info.value.trajectory.t) >= 2


def test_reverse_state_flips_signs():
    state = BoundState(2, 1, 1)
    tr = integrate_time_trajectory(state, HIDDEN, start(state), IntegratorConfig(t_end=3.0))
    back = reverse_state(tr)
    assert back.signs == tuple(-s for s in tr.signs[-1])
    assert back.r == tr.r[-1]


def test_angular_curve_bounded_by_polar_turns():
    state = BoundState(2, 1, 1)
    ts = polar_root(state)
    tr = angular_trajectory(state, HIDDEN, 0.5 * math.pi, 0.0, IntegratorConfig(t_end=200), polar_events=6,
                            return_trajectory=True)
    assert tr.mode == "angular"
    turns = tr.events_of(EventKind.POLAR_TURN)
    assert len(turns) == 6
    for e in turns:
        assert min(abs(e.theta - ts), abs(e.theta - (math.pi - ts))) < 1e-8
    assert tr.theta.min() >= ts - 1e-8 and tr.theta.max() <= math.pi - ts + 1e-8
    pts = angular_trajectory(state, HIDDEN, 0.5 * math.pi, 0.0, IntegratorConfig(t_end=5.0))
    assert isinstance(pts, list) and len(pts[0]) == 2


def test_angular_m0_reaches_poles():
    tr = angular_trajectory(BoundState(2, 1, 0), HIDDEN, 1.0, 0.0, IntegratorConfig(t_end=500), polar_events=4,
                            return_trajectory=True)
    kinds = {e.kind for e in tr.events}
    assert EventKind.POLE_PASS in kinds or EventKind.POLAR_TURN in kinds


@pytest.mark.parametrize("state", CATALOG_STATES, ids=lambda s: s.label)
def test_spatial_orbit_third_relation(state):
    sp = integrate_spatial_orbit(state, HIDDEN, start(state), IntegratorConfig(t_end=1e9), segments=2)
    assert sp.mode == "spatial" and sp.meta["segments"] == 2
    assert sp.extra["eq80_residual"].max() < 1e-5
    assert np.all(np.diff(sp.t) > 0)
