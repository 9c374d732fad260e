"""Hydrogen basis functions and wronskian-normalized solution pairs.

Each coordinate carries a linear equation ``s'' = Q(q) s``:

* radial:    Q(r) = 2 (V(r) + lam / (2 r^2) - E)
* polar:     Q(t) = (m^2 - 1/4) / sin(t)^2 - (lam + 1/4)
* azimuthal: Q(p) = -m^2

``s1`` is the Rodrigues-generated solution with constant factors dropped and
``s2`` is a companion with ``s1 s2' - s2 s1' = 1``.  Closed forms are used for
the four catalogued states, anything else goes through a numeric integration
of the same equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import expi

from .units import energy_of_state

POLE_EPS = 1e-6


class Coordinate(str, Enum):
    RADIAL = "radial"
    POLAR = "polar"
    AZIMUTHAL = "azimuthal"


@dataclass(frozen=True)
class BoundState:
    """Hydrogen quantum numbers (n, l, m_l)."""

    n: int
    l: int
    m_l: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0 <= self.l <= self.n - 1:
            raise ValueError(f"l must satisfy 0 <= l <= n-1, got l={self.l} for n={self.n}")
        if abs(self.m_l) > self.l:
            raise ValueError(f"m_l must satisfy |m_l| <= l, got m_l={self.m_l} for l={self.l}")

    @property
    def E(self) -> float:
        return energy_of_state(self.n)

    @property
    def lam(self) -> int:
        return self.l * (self.l + 1)

    @property
    def mq(self) -> float:
        """m_l^2 - 1/4, the azimuthal bracket constant."""
        return self.m_l**2 - 0.25

    @property
    def label(self) -> str:
        return f"({self.n},{self.l},{self.m_l})"

    @classmethod
    def parse(cls, text: str) -> "BoundState":
        parts = [p for p in text.replace(" ", "").split(",") if p]
        if len(parts) != 3:
            raise ValueError(f"state must be 'n,l,m', got {text!r}")
        return cls(*(int(p) for p in parts))


CATALOG_STATES = (BoundState(1, 0, 0), BoundState(2, 0, 0), BoundState(2, 1, 0), BoundState(2, 1, 1))


# -- exact polynomial-times-exponential carrier -------------------------------


@dataclass(frozen=True)
class PolyExp:
    """``x**power_prefix * P(x) * exp(-decay * x)`` with exact rational data.

    ``coeffs[k]`` multiplies ``x**k``.  Differentiation is closed and exact
    when ``power_prefix`` is zero.
    """

    coeffs: tuple
    decay: Fraction = Fraction(0)
    power_prefix: Fraction = Fraction(0)

    @staticmethod
    def monomial(k: int, decay=0) -> "PolyExp":
        return PolyExp(tuple([Fraction(0)] * k + [Fraction(1)]), Fraction(decay))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def derivative(self) -> "PolyExp":
        if self.power_prefix != 0:
            raise ValueError("exact differentiation requires power_prefix == 0")
        c = list(self.coeffs)
        dp = [k * c[k] for k in range(1, len(c))] + [Fraction(0)]
        out = [dp[k] - self.decay * c[k] for k in range(len(c))]
        return PolyExp(tuple(_trim(out)), self.decay)

    def times_exp(self, rate) -> "PolyExp":
        """Multiply by exp(rate * x)."""
        return PolyExp(self.coeffs, self.decay - Fraction(rate), self.power_prefix)

    def divide_power(self, k: int) -> "PolyExp":
        """Divide by x**k, exactly when the low coefficients vanish."""
        c = list(self.coeffs)
        if any(v != 0 for v in c[:k]):
            return PolyExp(self.coeffs, self.decay, self.power_prefix - k)
        return PolyExp(tuple(c[k:]) or (Fraction(0),), self.decay, self.power_prefix)

    def scaled(self, factor) -> "PolyExp":
        f = Fraction(factor)
        return PolyExp(tuple(v * f for v in self.coeffs), self.decay, self.power_prefix)

    def poly_values(self, x):
        c = np.array([float(v) for v in self.coeffs[::-1]])
        return np.polyval(c, x)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self.poly_values(x) * np.exp(-float(self.decay) * x)
        if self.power_prefix != 0:
            out = out * x ** float(self.power_prefix)
        return out if out.ndim else float(out)


def _trim(c):
    c = list(c)
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c


def _poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _poly_pow(a, k):
    out = [Fraction(1)]
    for _ in range(k):
        out = _poly_mul(out, a)
    return out


def _poly_deriv(a):
    return _trim([k * a[k] for k in range(1, len(a))] or [Fraction(0)])


# -- radial -------------------------------------------------------------------


def radial_chi(state: BoundState) -> PolyExp:
    """Rodrigues form e^{r/n} r^{-l} d^{n-l-1}/dr^{n-l-1}[r^{n+l} e^{-2r/n}].

    Constant factors produced by the differentiation are kept, so
    (1,0) -> r e^{-r}, (2,0) -> (2r - r^2) e^{-r/2}, (2,1) -> r^2 e^{-r/2}.
    """
    n, l = state.n, state.l
    if l >= n:
        raise ValueError(f"l must be < n, got l={l}, n={n}")
    f = PolyExp.monomial(n + l, Fraction(2, n))
    for _ in range(n - l - 1):
        f = f.derivative()
    return f.divide_power(l).times_exp(Fraction(1, n))


def radial_q(state: BoundState, potential: Callable | None = None) -> Callable:
    lam, E = state.lam, state.E
    if potential is None:
        return lambda r: 2.0 * (-1.0 / r + lam / (2.0 * r * r) - E)
    return lambda r: 2.0 * (potential(r) + lam / (2.0 * r * r) - E)


# -- polar --------------------------------------------------------------------


@dataclass(frozen=True)
class PolarFunction:
    """``sin(t)**(|m| + 1/2) * P(cos t)`` with P a monic polynomial."""

    l: int
    m_abs: int
    coeffs: tuple  # ascending powers of u = cos(t)

    def _p(self, u, coeffs=None):
        c = np.array([float(v) for v in (coeffs or self.coeffs)[::-1]])
        return np.polyval(c, u)

    def value(self, t):
        s, u = np.sin(t), np.cos(t)
        return s ** (self.m_abs + 0.5) * self._p(u)

    def derivative(self, t):
        s, u = np.sin(t), np.cos(t)
        dp = self._p(u, tuple(_poly_deriv(list(self.coeffs))))
        return s ** (self.m_abs - 0.5) * ((self.m_abs + 0.5) * u * self._p(u) - s * s * dp)

    def __call__(self, t):
        return self.value(t)


def polar_T(l: int, m_l: int) -> PolarFunction:
    """(1-u^2)^{|m|/2+1/4} d^{l+|m|}/du^{l+|m|} (1-u^2)^l with u = cos(t), made monic."""
    if abs(m_l) > l or l < 0:
        raise ValueError(f"need |m_l| <= l, got l={l}, m_l={m_l}")
    p = _poly_pow([Fraction(1), Fraction(0), Fraction(-1)], l)
    for _ in range(l + abs(m_l)):
        p = _poly_deriv(p)
    p = _trim(p)
    lead = p[-1]
    return PolarFunction(l, abs(m_l), tuple(v / lead for v in p))


def polar_q(l: int, m_l: int) -> Callable:
    lam, mq = l * (l + 1), m_l * m_l - 0.25
    return lambda t: mq / np.sin(t) ** 2 - (lam + 0.25)


# -- azimuthal ----------------------------------------------------------------


@dataclass(frozen=True)
class AzimuthalFunction:
    m_abs: int

    def value(self, p):
        if self.m_abs == 0:
            return np.ones_like(np.asarray(p, dtype=float)) if np.ndim(p) else 1.0
        return np.sin(self.m_abs * p)

    def derivative(self, p):
        if self.m_abs == 0:
            return np.zeros_like(np.asarray(p, dtype=float)) if np.ndim(p) else 0.0
        return self.m_abs * np.cos(self.m_abs * p)

    def __call__(self, p):
        return self.value(p)


def azimuthal_F(m_l: int) -> AzimuthalFunction:
    """sin(|m| p) for m != 0, the constant 1 for m = 0."""
    return AzimuthalFunction(abs(int(m_l)))


# -- solution pairs -----------------------------------------------------------

Evaluator = Callable[[object], tuple]


@dataclass(frozen=True)
class SolutionPair:
    """Two solutions of ``s'' = Q s`` with evaluators returning (value, derivative)."""

    coordinate: Coordinate
    s1: Evaluator
    s2: Evaluator
    q_coeff: Callable
    wronskian: float = 1.0
    catalog_id: int = -1
    label: str = ""
    domain: tuple = (-np.inf, np.inf)

    def values(self, q):
        """Return (s1, s1', s2, s2') at q."""
        a, da = self.s1(q)
        b, db = self.s2(q)
        return a, da, b, db

    def wronskian_at(self, q):
        a, da, b, db = self.values(q)
        return a * db - b * da

    def with_s2_scaled(self, factor: float) -> "SolutionPair":
        """Copy with s2 multiplied by ``factor`` (wronskian becomes ``factor``)."""
        s2 = self.s2

        def scaled(q):
            v, d = s2(q)
            return factor * v, factor * d

        return SolutionPair(self.coordinate, self.s1, scaled, self.q_coeff, self.wronskian * factor, -1,
                            self.label + f"*s2x{factor}", self.domain)


def _rad_10(r):
    r = np.asarray(r, dtype=float)
    em, ep, ei = np.exp(-r), np.exp(r), expi(2.0 * r)
    return (r * em, (1.0 - r) * em), (-ep + 2.0 * r * em * ei, ep + 2.0 * (1.0 - r) * em * ei)


def _rad_20(r):
    r = np.asarray(r, dtype=float)
    em, ep, ei = np.exp(-0.5 * r), np.exp(0.5 * r), expi(r)
    v1 = (2.0 * r - r * r) * em
    d1 = (2.0 - 3.0 * r + 0.5 * r * r) * em
    return (v1, d1), (0.5 * v1 * ei + 0.5 * (r - 1.0) * ep, 0.5 * d1 * ei + ep * (1.25 - 0.25 * r))


def _rad_21(r):
    r = np.asarray(r, dtype=float)
    em, ep, ei = np.exp(-0.5 * r), np.exp(0.5 * r), expi(r)
    v1 = r * r * em
    d1 = (2.0 * r - 0.5 * r * r) * em
    v2 = ep * (-1.0 / (3.0 * r) - 1.0 / 6.0 - r / 6.0) + v1 * ei / 6.0
    d2 = ep * (1.0 / (3.0 * r * r) - 1.0 / (6.0 * r) - 0.25 + r / 12.0) + d1 * ei / 6.0
    return (v1, d1), (v2, d2)


def _log_tan_half(t):
    return np.log(np.abs(np.tan(0.5 * np.asarray(t, dtype=float))))


def _pol_00(t):
    s, c, lg = np.sin(t), np.cos(t), _log_tan_half(t)
    sq = np.sqrt(s)
    return (sq, 0.5 * c / sq), (sq * lg, 0.5 * c / sq * lg + 1.0 / sq)


def _pol_10(t):
    s, c, lg = np.sin(t), np.cos(t), _log_tan_half(t)
    sq = np.sqrt(s)
    w = 1.0 + c + c * lg
    return (sq * c, (0.5 * c * c - s * s) / sq), (sq * w, (0.5 * c * w - s * s * (1.0 + lg) + c) / sq)


def _pol_11(t):
    s, c, lg = np.sin(t), np.cos(t), _log_tan_half(t)
    sq = np.sqrt(s)
    return ((s * sq, 1.5 * sq * c),
            (-c / (2.0 * sq) + 0.5 * s * sq * lg, sq + 0.25 * c * c / (s * sq) + 0.75 * sq * c * lg))


# Catalog ids shared with the integration kernels.
RADIAL_CATALOG = {(1, 0): (0, _rad_10), (2, 0): (1, _rad_20), (2, 1): (2, _rad_21)}
POLAR_CATALOG = {(0, 0): (0, _pol_00), (1, 0): (1, _pol_10), (1, 1): (2, _pol_11)}


def radial_catalog_id(n: int, l: int) -> int:
    return RADIAL_CATALOG.get((n, l), (-1, None))[0]


def polar_catalog_id(l: int, m_l: int) -> int:
    return POLAR_CATALOG.get((l, abs(m_l)), (-1, None))[0]


def _split(fn):
    def s1(q):
        return fn(q)[0]

    def s2(q):
        return fn(q)[1]

    return s1, s2


def second_solution(coordinate: Coordinate, s1: Evaluator, q_coeff: Callable, anchor: float,
                    domain: tuple, rtol: float = 1e-12, atol: float = 1e-14) -> SolutionPair:
    """Build a wronskian-one companion of ``s1`` by integrating ``s'' = Q s``.

    Initial data at ``anchor`` are ``s2 = -s1'/(s1^2+s1'^2)`` and
    ``s2' = s1/(s1^2+s1'^2)`` so that ``s1 s2' - s2 s1' = 1``.
    """
    v0, d0 = (float(x) for x in s1(anchor))
    norm = v0 * v0 + d0 * d0
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("degenerate seed solution: s1 and s1' vanish at the anchor")
    y0 = [-d0 / norm, v0 / norm]

    def rhs(q, y):
        return [y[1], q_coeff(q) * y[0]]

    lo, hi = domain
    pieces = []
    for end in (lo, hi):
        if end == anchor:
            continue
        sol = solve_ivp(rhs, (anchor, end), y0, method="DOP853", rtol=rtol, atol=atol, dense_output=True)
        if not sol.success:
            raise RuntimeError(f"second-solution integration failed: {sol.message}")
        pieces.append((min(anchor, end), max(anchor, end), sol.sol))

    def s2(q):
        q = np.asarray(q, dtype=float)
        flat = np.atleast_1d(q).ravel()
        out = np.empty((2, flat.size))
        for a, b, f in pieces:
            mask = (flat >= a) & (flat <= b)
            if mask.any():
                out[:, mask] = f(flat[mask])
        if np.any((flat < lo) | (flat > hi)):
            raise ValueError(f"point outside the tabulated domain [{lo}, {hi}]")
        if q.ndim == 0:
            return float(out[0, 0]), float(out[1, 0])
        return out[0].reshape(q.shape), out[1].reshape(q.shape)

    return SolutionPair(coordinate, s1, s2, q_coeff, 1.0, -1, "numeric", domain)


def radial_pair(state: BoundState, potential: Callable | None = None) -> SolutionPair:
    q = radial_q(state, potential)
    entry = RADIAL_CATALOG.get((state.n, state.l)) if potential is None else None
    if entry is not None:
        cid, fn = entry
        s1, s2 = _split(fn)
        return SolutionPair(Coordinate.RADIAL, s1, s2, q, 1.0, cid, f"radial{(state.n, state.l)}", (0.0, np.inf))
    chi = radial_chi(state)
    dchi = chi.derivative()

    def s1(r):
        return chi(r), dchi(r)

    r_max = 60.0 * state.n**2
    return second_solution(Coordinate.RADIAL, s1, q, anchor=float(state.n**2), domain=(1e-6, r_max))


def polar_pair(l: int, m_l: int) -> SolutionPair:
    q = polar_q(l, m_l)
    entry = POLAR_CATALOG.get((l, abs(m_l)))
    if entry is not None:
        cid, fn = entry
        s1, s2 = _split(fn)
        return SolutionPair(Coordinate.POLAR, s1, s2, q, 1.0, cid, f"polar{(l, abs(m_l))}", (0.0, np.pi))
    T = polar_T(l, m_l)

    def s1(t):
        return T.value(t), T.derivative(t)

    return second_solution(Coordinate.POLAR, s1, q, anchor=0.5 * np.pi + 0.1234,
                           domain=(POLE_EPS, np.pi - POLE_EPS))


def azimuthal_pair(m_l: int) -> SolutionPair:
    """(1, p) for m = 0; (sin |m|p, -cos(|m|p)/|m|) otherwise."""
    k = abs(int(m_l))
    q = lambda p: -float(k * k)  # noqa: E731
    if k == 0:
        def s1(p):
            p = np.asarray(p, dtype=float)
            return np.ones_like(p) if p.ndim else 1.0, np.zeros_like(p) if p.ndim else 0.0

        def s2(p):
            p = np.asarray(p, dtype=float)
            return (p if p.ndim else float(p)), (np.ones_like(p) if p.ndim else 1.0)
    else:
        def s1(p):
            return np.sin(k * np.asarray(p, dtype=float)), k * np.cos(k * np.asarray(p, dtype=float))

        def s2(p):
            return -np.cos(k * np.asarray(p, dtype=float)) / k, np.sin(k * np.asarray(p, dtype=float))

    return SolutionPair(Coordinate.AZIMUTHAL, s1, s2, q, 1.0, k, f"azimuthal({k})")


def solution_pair(state: BoundState, coordinate: Coordinate | str) -> SolutionPair:
    coordinate = Coordinate(coordinate)
    if coordinate is Coordinate.RADIAL:
        return radial_pair(state)
    if coordinate is Coordinate.POLAR:
        return polar_pair(state.l, state.m_l)
    return azimuthal_pair(state.m_l)


def sign_change_count(f: Callable, lo: float, hi: float, n: int = 20001) -> int:
    """Count sign changes of ``f`` on a uniform grid (zeros of odd order)."""
    x = np.linspace(lo, hi, n)
    v = np.sign(f(x))
    v = v[v != 0]
    return int(np.count_nonzero(v[1:] != v[:-1]))


@dataclass(frozen=True)
class StateBasis:
    """The three solution pairs of one bound state."""

    state: BoundState
    radial: SolutionPair = field(init=False)
    polar: SolutionPair = field(init=False)
    azimuthal: SolutionPair = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "radial", radial_pair(self.state))
        object.__setattr__(self, "polar", polar_pair(self.state.l, self.state.m_l))
        object.__setattr__(self, "azimuthal", azimuthal_pair(self.state.m_l))
