import numpy as np
import pytest

import oracles
from qhj import CATALOG_STATES, BoundState, HiddenVariables, components, momentum, qshje_residual, reduced_action
from qhj.momenta import azimuthal_angle, azimuthal_component, polar_component, radial_component

H = HiddenVariables(1.3, -0.4, 0.7, 0.3, -1.1, 0.5)
R = np.geomspace(0.05, 30.0, 300)
T = np.linspace(0.05, np.pi - 0.05, 200)
P = np.linspace(0.05, 2 * np.pi - 0.05, 200)


def test_hidden_validation():
    with pytest.raises(ValueError):
        HiddenVariables(a_r=0.0)
    with pytest.raises(ValueError):
        HiddenVariables(b_theta=np.nan)
    with pytest.raises(ValueError):
        HiddenVariables(sign_phi=0)


def test_hidden_parse_and_reverse():
    h = HiddenVariables.parse("1.5,-0.5,1,0,1,0", "-1,1,-1")
    assert h.as_tuple() == (1.5, -0.5, 1.0, 0.0, 1.0, 0.0)
    assert (h.sign_r, h.sign_theta, h.sign_phi) == (-1, 1, -1)
    assert h.reversed().reversed() == h
    with pytest.raises(ValueError):
        HiddenVariables.parse("1,2,3")


def test_radial_momentum_oracle():
    cz = radial_component(BoundState(1, 0, 0), HiddenVariables(1.5, -0.5))
    assert momentum(cz, 0.7) == pytest.approx(oracles.DERIVED_PR_100_AT_0P7, rel=1e-13)


@pytest.mark.parametrize("state", CATALOG_STATES, ids=lambda s: s.label)
def test_momenta_sign_definite_and_finite(state):
    cz, cl, cm = components(state, H)
    for comp, q in ((cz, R), (cl, T), (cm, P)):
        p = comp.momentum(q)
        assert np.all(np.isfinite(p))
        assert np.all(np.sign(p) == np.sign(comp.a))


@pytest.mark.parametrize("state", CATALOG_STATES, ids=lambda s: s.label)
def test_action_derivative_is_momentum(state):
    h = 1e-6
    cz, cl, cm = components(state, H)
    for comp, q in ((cz, R[10:-10]), (cl, T[5:-5]), (cm, P[5:-5])):
        fd = (comp.reduced_action(q + h) - comp.reduced_action(q - h)) / (2 * h)
        p = comp.momentum(q)
        assert np.max(np.abs(fd - p) / (1 + np.abs(p))) < 1e-6


@pytest.mark.parametrize("state", CATALOG_STATES, ids=lambda s: s.label)
def test_reduced_action_is_continuous(state):
    cz, cl, cm = components(state, H)
    for comp, q in ((cz, np.linspace(0.05, 30, 20001)), (cl, np.linspace(0.05, 3.09, 20001)),
                    (cm, np.linspace(0.01, 6.27, 20001))):
        assert np.max(np.abs(np.diff(reduced_action(comp, q)))) < 0.05


@pytest.mark.parametrize("state", CATALOG_STATES, ids=lambda s: s.label)
def test_component_equations_hold(state):
    cz, cl, cm = components(state, H)
    for comp, q in ((cz, R), (cl, T), (cm, P)):
        assert np.max(np.abs(qshje_residual(comp, q, state))) < 1e-9


def test_component_equations_fail_without_quantum_term():
    state = BoundState(2, 1, 1)
    cz = radial_component(state, H)
    assert np.max(np.abs(qshje_residual(cz, R, state, hbar2=0.0))) > 1e-2


def test_fd_schwarzian_agrees_with_analytic():
    comp = polar_component(BoundState(2, 1, 0), H)
    q = np.linspace(0.4, 2.7, 30)
    a = comp.schwarzian(q)
    f = comp.schwarzian(q, method="fd", h=1e-3)
    assert np.max(np.abs(a - f) / (1 + np.abs(a))) < 1e-5
    with pytest.raises(ValueError):
        comp.schwarzian(q, method="spline")


@pytest.mark.parametrize("m", [0, 1, -1])
def test_azimuthal_angle_inverts_action(m):
    state = BoundState(2, 1, m)
    for sign in (1, -1):
        cm = azimuthal_component(state, H, sign)
        phi = np.linspace(0.01, 4 * np.pi, 400) if m else np.linspace(-0.5, 3.0, 100)
        back = azimuthal_angle(cm, cm.reduced_action(phi))
        assert np.max(np.abs(back - phi)) < 1e-10


def test_sign_flips_momentum():
    cz = radial_component(BoundState(2, 0, 0), H)
    assert np.allclose(cz.with_sign(-1).momentum(R), -cz.momentum(R))
    with pytest.raises(ValueError):
        cz.with_sign(0)
