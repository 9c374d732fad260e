import numpy as np
import pytest

import oracles
from helpers import start
from qhj import (BoundState, EjectionKind, HiddenVariables, IntegratorConfig, TrajectoryState, classify_ejection,
                 detect_nodes, hidden_ensemble, integrate_time_trajectory, trap_zone)
from qhj.analysis import UnboundStateError, expected_node_count

CFG = IntegratorConfig(t_end=1e4, radial_periods=2)


def _ensemble(state, n=4, seed=3):
    return [integrate_time_trajectory(state, h, start(state), CFG) for h in hidden_ensemble(n, seed)]


def test_trap_zone_values():
    z = trap_zone(BoundState(1, 0, 0))
    assert z.contains_origin and z.r1 == 0.0
    assert z.r2 == pytest.approx(oracles.PAPER_R2_100, rel=1e-12)
    assert z.roots == (z.r2,)
    z = trap_zone(BoundState(2, 1, 1))
    assert z.roots == pytest.approx((oracles.DERIVED_R1_21X, oracles.DERIVED_R2_21X), rel=1e-12)
    assert list(z.contains([0.5, 3.0, 7.0])) == [False, True, False]


def test_trap_zone_custom_potential():
    # screened potential shrinks the zone
    z = trap_zone(BoundState(1, 0, 0), potential=lambda r: -np.exp(-0.1 * r) / r)
    assert 0.0 < z.r2 < 2.0
    with pytest.raises(UnboundStateError):
        trap_zone(BoundState(2, 1, 0), potential=lambda r: 0.0 * r)


def test_expected_node_count():
    assert expected_node_count(BoundState(1, 0, 0)) == (3, (0.0, 2.0, 2.0))
    n, radii = expected_node_count(BoundState(2, 1, 0))
    assert n == 2 and radii == pytest.approx((oracles.DERIVED_R1_21X, oracles.DERIVED_R2_21X))


def test_hidden_ensemble_reproducible():
    a, b = hidden_ensemble(5, 11), hidden_ensemble(5, 11)
    assert a == b and a != hidden_ensemble(5, 12)
    for h in a:
        assert all(0.5 <= abs(v) <= 2.0 for v in (h.a_r, h.a_theta, h.a_phi))
        assert all(-1.0 <= v <= 1.0 for v in (h.b_r, h.b_theta, h.b_phi))


def test_radial_nodes_at_zone_roots():
    state = BoundState(2, 1, 0)
    cat = detect_nodes(_ensemble(state))
    common = cat.common(1.0)
    assert len(common) == 2
    assert sorted(n.r for n in common) == pytest.approx(list(trap_zone(state).roots), abs=1e-6)


def test_ground_state_nodes_include_origin():
    state = BoundState(1, 0, 0)
    cat = detect_nodes(_ensemble(state))
    radii = sorted(n.r for n in cat.common(1.0))
    assert radii[0] == 0.0 and radii[-1] == pytest.approx(2.0, abs=1e-6)


def test_spatial_nodes_mode():
    cat = detect_nodes(_ensemble(BoundState(2, 0, 0), n=3), mode="spatial", node_tol=0.05)
    assert cat.mode == "spatial" and cat.tolerance == 0.05
    for n in cat.nodes:
        assert n.support >= 2 and len(n.position) == 3


def test_detect_nodes_argument_errors():
    ens = _ensemble(BoundState(2, 0, 0), n=2)
    with pytest.raises(ValueError):
        detect_nodes(ens[:1])
    with pytest.raises(ValueError):
        detect_nodes(ens, mode="grid")
    other = integrate_time_trajectory(BoundState(1, 0, 0), hidden_ensemble(1)[0], TrajectoryState(r=1.0), CFG)
    with pytest.raises(ValueError, match="mixes"):
        detect_nodes(ens + [other])


def test_ejection_dichotomy():
    state, h = BoundState(1, 0, 0), HiddenVariables(1.5, -0.5, 1.0, 0.0, 1.0, 0.0)
    out = classify_ejection(state, h, 2.1)
    assert out.kind is EjectionKind.EJECTED
    assert out.time == pytest.approx(oracles.DERIVED_T_EJECT_100, rel=1e-8)
    assert str(out).startswith("Ejected(0.275")
    inside = classify_ejection(state, h, 1.0)
    assert inside.kind is EjectionKind.TRAPPED and str(inside) == "Trapped"
    with pytest.raises(ValueError):
        classify_ejection(state, h, 0.0)
