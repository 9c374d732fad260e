from fractions import Fraction

import numpy as np
import pytest

import oracles
from qhj.basis import (CATALOG_STATES, BoundState, Coordinate, azimuthal_pair, polar_pair, polar_T, radial_chi,
                       radial_pair, second_solution, sign_change_count, solution_pair)

R = np.linspace(0.05, 20.0, 400)
T = np.linspace(0.02, np.pi - 0.02, 300)


@pytest.mark.parametrize("args", [(0, 0, 0), (1, 1, 0), (2, 1, 2), (2, 1, -2)])
def test_bound_state_validation(args):
    with pytest.raises(ValueError):
        BoundState(*args)


def test_bound_state_properties():
    s = BoundState.parse("2, 1, -1")
    assert s == BoundState(2, 1, -1)
    assert (s.E, s.lam, s.mq, s.label) == (-0.125, 2, 0.75, "(2,1,-1)")
    with pytest.raises(ValueError):
        BoundState.parse("2,1")


def test_rodrigues_radial_forms():
    assert radial_chi(BoundState(1, 0, 0)).coeffs == (Fraction(0), Fraction(1))
    c20 = radial_chi(BoundState(2, 0, 0))
    assert c20.coeffs == (Fraction(0), Fraction(2), Fraction(-1)) and c20.decay == Fraction(1, 2)
    assert radial_chi(BoundState(2, 1, 0)).coeffs == (Fraction(0), Fraction(0), Fraction(1))


@pytest.mark.parametrize("state", CATALOG_STATES, ids=lambda s: s.label)
def test_catalog_pairs_have_unit_wronskian(state):
    for coord, q in ((Coordinate.RADIAL, R), (Coordinate.POLAR, T), (Coordinate.AZIMUTHAL, T)):
        pair = solution_pair(state, coord)
        assert np.max(np.abs(pair.wronskian_at(q) - 1.0)) < 1e-11


@pytest.mark.parametrize("state", CATALOG_STATES, ids=lambda s: s.label)
def test_catalog_pairs_solve_their_equation(state):
    # second derivative from the derivative column by central differences
    h = 1e-5
    for coord, q in ((Coordinate.RADIAL, R[5:-5]), (Coordinate.POLAR, T[5:-5])):
        pair = solution_pair(state, coord)
        for ev in (pair.s1, pair.s2):
            v = ev(q)[0]
            dd = (ev(q + h)[1] - ev(q - h)[1]) / (2 * h)
            rel = np.abs(dd - pair.q_coeff(q) * v) / (1.0 + np.abs(pair.q_coeff(q) * v))
            assert rel.max() < 1e-6


def test_closed_forms_match_quadrature_oracles():
    assert radial_pair(BoundState(1, 0, 0)).s2(1.5)[0] == pytest.approx(oracles.DERIVED_RAD10_S2_AT_1P5, rel=1e-13)
    assert radial_pair(BoundState(2, 1, 0)).s2(3.0)[0] == pytest.approx(oracles.DERIVED_RAD21_S2_AT_3, rel=1e-13)
    assert polar_pair(1, 1).s2(1.0)[0] == pytest.approx(oracles.DERIVED_POL11_S2_AT_1, rel=1e-13)


def test_numeric_second_solution_matches_closed_form():
    # build (2,0) radial companion numerically and compare up to the s1 component
    closed = radial_pair(BoundState(2, 0, 0))
    num = second_solution(Coordinate.RADIAL, closed.s1, closed.q_coeff, 3.0, (0.5, 12.0))
    x = np.linspace(0.6, 11.0, 50)
    assert np.max(np.abs(num.wronskian_at(x) - 1.0)) < 1e-9
    # any two wronskian-one companions differ by a multiple of s1
    d = num.s2(x)[0] - closed.s2(x)[0]
    c = d / closed.s1(x)[0]
    assert np.ptp(c[np.abs(closed.s1(x)[0]) > 0.1]) < 1e-8


def test_non_catalog_state_uses_numeric_pair():
    pair = radial_pair(BoundState(3, 1, 0))
    assert pair.catalog_id == -1
    x = np.linspace(1.0, 30.0, 40)
    assert np.max(np.abs(pair.wronskian_at(x) - 1.0)) < 1e-8
    pp = polar_pair(2, 1)
    assert np.max(np.abs(pp.wronskian_at(np.linspace(0.2, 2.9, 40)) - 1.0)) < 1e-8


def test_second_solution_degenerate_seed():
    with pytest.raises(ValueError, match="degenerate"):
        second_solution(Coordinate.RADIAL, lambda q: (0.0, 0.0), lambda q: 1.0, 1.0, (0.5, 2.0))


@pytest.mark.parametrize("n,l,nodes", [(1, 0, 0), (2, 0, 1), (2, 1, 0), (3, 0, 2), (3, 1, 1)])
def test_radial_node_count(n, l, nodes):
    chi = radial_chi(BoundState(n, l, 0))
    assert sign_change_count(chi, 1e-3, 40.0 * n) == nodes


@pytest.mark.parametrize("l,m", [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2), (3, 1)])
def test_polar_function_node_count(l, m):
    T_ = polar_T(l, m)
    assert sign_change_count(T_, 1e-4, np.pi - 1e-4) == l - m


def test_polar_derivative_consistent():
    T_ = polar_T(2, 1)
    h = 1e-6
    fd = (T_.value(T + h) - T_.value(T - h)) / (2 * h)
    assert np.max(np.abs(fd - T_.derivative(T))) < 1e-8


def test_azimuthal_pairs():
    p0 = azimuthal_pair(0)
    assert p0.s2(2.0) == (2.0, 1.0)
    p1 = azimuthal_pair(-1)
    assert np.allclose(p1.wronskian_at(T), 1.0)
    assert p1.q_coeff(0.3) == -1.0


def test_scaled_pair_changes_wronskian():
    pair = radial_pair(BoundState(1, 0, 0)).with_s2_scaled(1.01)
    assert np.allclose(pair.wronskian_at(R), 1.01)
    assert pair.catalog_id == -1
