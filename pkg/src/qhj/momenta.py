"""Floydian momenta, reduced actions and component QSHJE residuals.

With a wronskian-one pair (s1, s2) and hidden constants (a, b) the momentum
of one coordinate is ``sign * a / D`` with ``D = s1^2 + (a s2 + b s1)^2`` and
the reduced action is ``sign * arctan((a s2 + b s1) / s1)`` continued
across the zeros of ``s1``.  Internal units, hbar = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .basis import (BoundState, Coordinate, SolutionPair, azimuthal_pair, polar_T, polar_pair, radial_chi,
                    radial_pair)


@dataclass(frozen=True)
class HiddenVariables:
    """The six integration constants plus initial directions of motion.

    ``sign_*`` is the initial direction along each coordinate (+1 means the
    coordinate increases).  The momentum signs that reproduce those
    directions are derived by the dynamics module.
    """

    a_r: float = 1.0
    b_r: float = 0.0
    a_theta: float = 1.0
    b_theta: float = 0.0
    a_phi: float = 1.0
    b_phi: float = 0.0
    sign_r: int = 1
    sign_theta: int = 1
    sign_phi: int = 1

    def __post_init__(self):
        for name in ("a_r", "a_theta", "a_phi"):
            v = getattr(self, name)
            if not np.isfinite(v) or v == 0.0:
                raise ValueError(f"{name} must be finite and nonzero, got {v!r}")
        for name in ("b_r", "b_theta", "b_phi"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        for name in ("sign_r", "sign_theta", "sign_phi"):
            if getattr(self, name) not in (1, -1):
                raise ValueError(f"{name} must be +1 or -1")

    @classmethod
    def parse(cls, text: str, signs: str | None = None) -> "HiddenVariables":
        vals = [float(v) for v in text.replace(" ", "").split(",") if v]
        if len(vals) != 6:
            raise ValueError(f"hidden variables need six values a_r,b_r,a_t,b_t,a_p,b_p; got {text!r}")
        kw = {}
        if signs:
            sg = [int(v) for v in signs.replace(" ", "").split(",") if v]
            if len(sg) != 3:
                raise ValueError("signs need three values")
            kw = dict(sign_r=sg[0], sign_theta=sg[1], sign_phi=sg[2])
        return cls(*vals, **kw)

    def as_tuple(self) -> tuple:
        return (self.a_r, self.b_r, self.a_theta, self.b_theta, self.a_phi, self.b_phi)

    def reversed(self) -> "HiddenVariables":
        return replace(self, sign_r=-self.sign_r, sign_theta=-self.sign_theta, sign_phi=-self.sign_phi)


@dataclass(frozen=True)
class MomentumComponent:
    """One coordinate's momentum: pair, hidden constants and momentum sign."""

    coordinate: Coordinate
    pair: SolutionPair
    a: float
    b: float
    sign: int = 1
    zeros: tuple = ()  # zeros of s1 inside the open domain, ascending
    m_abs: int = 0  # azimuthal only

    def __post_init__(self):
        if self.a == 0.0:
            raise ValueError("momentum numerator a must be nonzero")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def with_sign(self, sign: int) -> "MomentumComponent":
        return replace(self, sign=int(sign))

    def parts(self, q):
        """(s1, s1', y, y', D) with y = a s2 + b s1."""
        s1, d1, s2, d2 = self.pair.values(q)
        y = self.a * s2 + self.b * s1
        dy = self.a * d2 + self.b * d1
        return s1, d1, y, dy, s1 * s1 + y * y

    def momentum(self, q):
        s1, _, y, _, D = self.parts(q)
        if np.any(D == 0.0):
            raise ArithmeticError("s1 and s2 vanish together: wronskian violated")
        return self.sign * self.a / D

    def winding(self, q):
        """Signed count of zeros of s1 between the domain start and q."""
        q = np.asarray(q, dtype=float)
        if self.coordinate is Coordinate.AZIMUTHAL:
            if self.m_abs == 0:
                return np.zeros_like(q)
            return np.ceil(self.m_abs * q / np.pi) - 1.0
        n = np.zeros_like(q)
        for z in self.zeros:
            n = n + (q > z)
        return n

    def reduced_action(self, q):
        s1, _, y, _, _ = self.parts(q)
        with np.errstate(divide="ignore", invalid="ignore"):
            base = np.where(s1 == 0.0, np.sign(self.a) * 0.5 * np.pi, np.arctan(y / s1))
        out = self.sign * (base + np.sign(self.a) * np.pi * self.winding(q))
        return out if np.ndim(out) else float(out)

    def d_terms(self, q):
        """(D, D', D'') from the pair and its linear equation."""
        s1, d1, y, dy, D = self.parts(q)
        Q = self.pair.q_coeff(q)
        dD = 2.0 * (s1 * d1 + y * dy)
        ddD = 2.0 * (d1 * d1 + dy * dy + Q * D)
        return D, dD, ddD

    def schwarzian(self, q, method: str = "analytic", h: float = 1e-3):
        """Schwarzian derivative {S, q} = S'''/S' - 1.5 (S''/S')^2."""
        if method == "analytic":
            D, dD, ddD = self.d_terms(q)
            return 0.5 * (dD / D) ** 2 - ddD / D
        if method == "fd":
            q = np.asarray(q, dtype=float)
            p = [self.momentum(q + k * h) for k in (-2, -1, 0, 1, 2)]
            d1 = (p[0] - 8 * p[1] + 8 * p[3] - p[4]) / (12 * h)
            d2 = (-p[0] + 16 * p[1] - 30 * p[2] + 16 * p[3] - p[4]) / (12 * h * h)
            return d2 / p[2] - 1.5 * (d1 / p[2]) ** 2
        raise ValueError(f"unknown method {method!r}")


def _radial_zeros(state: BoundState) -> tuple:
    chi = radial_chi(state)
    c = [float(v) for v in chi.coeffs]
    roots = np.roots(c[::-1]) if len(c) > 1 else []
    z = sorted(float(x.real) for x in roots if abs(x.imag) < 1e-12 and x.real > 1e-12)
    return tuple(z)


def _polar_zeros(l: int, m_l: int) -> tuple:
    T = polar_T(l, m_l)
    c = [float(v) for v in T.coeffs]
    roots = np.roots(c[::-1]) if len(c) > 1 else []
    z = sorted(float(np.arccos(x.real)) for x in roots if abs(x.imag) < 1e-12 and -1 < x.real < 1)
    return tuple(z)


def radial_component(state: BoundState, hidden: HiddenVariables, sign: int = 1,
                     pair: SolutionPair | None = None) -> MomentumComponent:
    return MomentumComponent(Coordinate.RADIAL, pair or radial_pair(state), hidden.a_r, hidden.b_r, sign,
                             _radial_zeros(state))


def polar_component(state: BoundState, hidden: HiddenVariables, sign: int = 1,
                    pair: SolutionPair | None = None) -> MomentumComponent:
    return MomentumComponent(Coordinate.POLAR, pair or polar_pair(state.l, state.m_l), hidden.a_theta,
                             hidden.b_theta, sign, _polar_zeros(state.l, state.m_l))


def azimuthal_component(state: BoundState, hidden: HiddenVariables, sign: int = 1,
                        pair: SolutionPair | None = None) -> MomentumComponent:
    return MomentumComponent(Coordinate.AZIMUTHAL, pair or azimuthal_pair(state.m_l), hidden.a_phi,
                             hidden.b_phi, sign, (), abs(state.m_l))


def components(state: BoundState, hidden: HiddenVariables, signs=(1, 1, 1)) -> tuple:
    return (radial_component(state, hidden, signs[0]), polar_component(state, hidden, signs[1]),
            azimuthal_component(state, hidden, signs[2]))


def momentum(component: MomentumComponent, q):
    """sign * a / ((a s2 + b s1)^2 + s1^2)."""
    return component.momentum(q)


def reduced_action(component: MomentumComponent, q):
    """sign * arctan((a s2 + b s1)/s1), continuous across zeros of s1."""
    return component.reduced_action(q)


def qshje_residual(component: MomentumComponent, q, state: BoundState, hbar2: float = 1.0,
                   method: str = "analytic", potential=None):
    """Left minus right side of one component equation.

    radial:    Z'^2/2 + hbar^2/4 {Z,r} + V + lam/(2 r^2) - E
    polar:     L'^2 + hbar^2/2 {L,t} + (m^2 - 1/4)/sin^2 t - (lam + 1/4)
    azimuthal: M'^2 + hbar^2/2 {M,p} - m^2
    """
    p = component.momentum(q)
    sch = component.schwarzian(q, method)
    if component.coordinate is Coordinate.RADIAL:
        q = np.asarray(q, dtype=float)
        V = -1.0 / q if potential is None else potential(q)
        return 0.5 * p * p + 0.25 * hbar2 * sch + V + state.lam / (2.0 * q * q) - state.E
    if component.coordinate is Coordinate.POLAR:
        s = np.sin(q)
        return p * p + 0.5 * hbar2 * sch + state.mq / (s * s) - (state.lam + 0.25)
    return p * p + 0.5 * hbar2 * sch - float(state.m_l**2)


def azimuthal_angle(component: MomentumComponent, action):
    """Invert the azimuthal reduced action: return phi with M(phi) = action."""
    a, b, k = component.a, component.b, component.m_abs
    phase = component.sign * np.asarray(action, dtype=float)
    if k == 0:
        out = (np.tan(phase) - b) / a
    else:
        sa = np.sign(a)
        branch = np.floor((sa * phase + 0.5 * np.pi) / np.pi)
        rho = np.tan(phase - sa * branch * np.pi)
        cot_b = (b - rho) * k / a
        theta_b = 0.5 * np.pi - np.arctan(cot_b)
        out = (branch * np.pi + theta_b) / k
    return out if np.ndim(out) else float(out)
