import math

import numpy as np
import pytest

import oracles
from qhj import BoundState, ClassicalParams, IntegratorConfig, PurelyQuantumError, TrajectoryState, classical_orbit
from qhj.classical_dynamics import (ForbiddenRegionError, angular_momentum_vector, closure_gap, energy,
                                    orbit_equation_residuals, planarity, polar_turning_angle, radial_period,
                                    turning_radii)

FIG1 = ClassicalParams.figure1()


def test_params_validation():
    with pytest.raises(ValueError):
        ClassicalParams(0.1, 2.0, 0.5)
    with pytest.raises(ValueError):
        ClassicalParams(-0.1, 0.5, 1.0)
    with pytest.raises(ValueError):
        ClassicalParams(-0.1, 2.0, -0.5)
    with pytest.raises(ValueError):
        ClassicalParams(-0.1, 2.0, 0.5, (1, 2, 1))


@pytest.mark.parametrize("m", [0])
def test_purely_quantum_states_refused(m):
    with pytest.raises(PurelyQuantumError, match="beta"):
        ClassicalParams.from_quantum(BoundState(2, 1, m))


def test_from_quantum_211():
    p = ClassicalParams.from_quantum(BoundState(2, 1, 1))
    assert (p.E, p.alpha, p.beta) == (-0.125, 2.0, math.sqrt(0.75))
    assert p == FIG1


def test_turning_radii_and_angle():
    r1, r2 = turning_radii(FIG1)
    assert r1 == pytest.approx(oracles.PAPER_PERIHELION, rel=1e-14)
    assert r2 == pytest.approx(oracles.PAPER_APHELION, rel=1e-14)
    assert polar_turning_angle(FIG1) == pytest.approx(oracles.DERIVED_THETA_STAR_211, rel=1e-14)


def test_forbidden_start_rejected():
    with pytest.raises(ForbiddenRegionError):
        classical_orbit(FIG1, TrajectoryState(r=10.0, theta=0.5 * math.pi))


def test_kepler_period():
    tr = classical_orbit(FIG1, None, IntegratorConfig(t_end=1e4, radial_periods=2))
    assert radial_period(tr) == pytest.approx(oracles.DERIVED_KEPLER_PERIOD, rel=1e-10)


def test_conserved_quantities():
    tr = classical_orbit(FIG1, TrajectoryState(r=2.0, theta=1.1, phi=0.2), IntegratorConfig(t_end=300.0))
    assert np.max(np.abs(energy(tr) - FIG1.E)) < 1e-9
    res = orbit_equation_residuals(FIG1, tr)
    assert max(res.values()) < 1e-8
    L = angular_momentum_vector(FIG1, TrajectoryState(r=2.0, theta=1.1, phi=0.2))
    assert np.linalg.norm(L) == pytest.approx(math.sqrt(FIG1.alpha), rel=1e-12)
    assert planarity(tr, L) < 1e-7  # about six periods of accumulated error


def test_orbit_closes_after_one_period():
    tr = classical_orbit(FIG1, None, IntegratorConfig(t_end=1e4, radial_periods=1))
    assert closure_gap(tr) < 1e-6
    assert tr.r.min() == pytest.approx(oracles.PAPER_PERIHELION, abs=1e-8)
    assert tr.r.max() == pytest.approx(oracles.PAPER_APHELION, abs=1e-8)


def test_custom_potential_matches_builtin():
    cfg = IntegratorConfig(t_end=30.0)
    init = TrajectoryState(r=2.0, theta=1.0)
    a = classical_orbit(FIG1, init, cfg)
    b = classical_orbit(FIG1, init, cfg, potential=lambda r: -1.0 / r, dvdr=lambda r: 1.0 / (r * r))
    assert b.t[-1] == pytest.approx(a.t[-1])
    assert abs(a.r[-1] - b.r[-1]) < 1e-8
    with pytest.raises(ValueError):
        classical_orbit(FIG1, init, cfg, potential=lambda r: -1.0 / r)


def test_direction_signs():
    p = ClassicalParams(FIG1.E, FIG1.alpha, FIG1.beta, (-1, -1, -1))
    tr = classical_orbit(p, TrajectoryState(r=2.0, theta=1.0), IntegratorConfig(t_end=0.01))
    assert np.all(np.sign(tr.velocity[0]) == -1)
