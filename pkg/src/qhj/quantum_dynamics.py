"""Quantum trajectories from the Floydian momenta.

The integrated system is

    r'     = 2 [E - V - lam/(2 r^2)] / Z'(r)
    theta' = [lam - (m^2 - 1/4)/sin^2] / (r^2 L'(theta))
    phi'   = (m^2 - 1/4) / (r^2 sin^2 M'(phi))

Momenta never vanish, so a turning point is approached exponentially and is
only reached asymptotically.  The kernel therefore integrates logit
coordinates ``u = log((r - lo)/(hi - r))`` and ``w`` (same for theta on the
band between turning points or poles), which turn that approach into a linear
drift and keep full relative precision near both ends.  A turn is declared
when the distance to the root drops to ``turn_tol``; the momentum sign then
flips.  The azimuth is carried as the phase ``psi = M(phi)`` whose rate
``(m^2 - 1/4)/(r^2 sin^2)`` stays finite when phi runs off to infinity
(m = 0), and phi is recovered by inverting the arctan form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import core
from ._engine import (P_AR, P_AT, P_BR, P_BT, P_CHI, P_CLO, P_E, P_LAM, P_MQ, P_PID, P_PREG, P_R1, P_R2, P_RFIX,
                      P_RHI, P_RID, P_RLO, P_RREG, P_SHI, P_SLO, P_SR, P_ST, P_THI, P_TLO, P_TSTAR, P_UBASE)
from .basis import BoundState, polar_catalog_id, radial_catalog_id
from .momenta import HiddenVariables, azimuthal_angle, components


class EventKind(str, Enum):
    RADIAL_TURN = "RadialTurn"
    POLAR_TURN = "PolarTurn"
    SIGN_FLIP = "SignFlip"
    POLE_PASS = "PolePass"
    ORIGIN_APPROACH = "OriginApproach"
    EJECTION = "Ejection"
    AZIMUTHAL_WRAP = "AzimuthalWrap"


@dataclass(frozen=True)
class Event:
    t: float
    kind: EventKind
    r: float
    theta: float
    phi: float


@dataclass(frozen=True)
class TrajectoryState:
    """A point of a trajectory; ``signs`` are the three momentum signs."""

    t: float = 0.0
    r: float = 1.0
    theta: float = 0.5 * np.pi
    phi: float = 0.0
    signs: tuple | None = None

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if not 0.0 < self.theta < np.pi:
            raise ValueError(f"theta must lie in (0, pi), got {self.theta}")
        if self.signs is not None and any(s not in (1, -1) for s in self.signs):
            raise ValueError("signs must be +1 or -1")


@dataclass
class IntegratorConfig:
    rel_tol: float = 1e-11
    abs_tol: float = 1e-12
    max_step: float = 0.0  # 0 means unbounded
    t_end: float = 50.0
    event_refine_tol: float = 1e-10
    r_min_guard: float = 1e-6
    theta_guard: float = 1e-6
    turn_tol: float = 1e-9
    ejection_radius: float = 100.0
    radial_periods: float | None = None
    max_steps: int = 500_000
    max_events: int = 200_000
    backend: str | None = None

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "event_refine_tol", "r_min_guard", "theta_guard", "turn_tol",
                     "ejection_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_step < 0:
            raise ValueError("max_step must be >= 0")


class IntegrationStall(RuntimeError):
    """The step size underflowed; ``trajectory`` holds the partial result."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class Trajectory:
    """Time-ordered samples with an event log.

    ``signs[i]`` are the momentum signs in force just after sample ``i`` and
    ``velocity[i]`` the matching (r', theta', phi').
    """

    t: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    events: list
    signs: np.ndarray
    velocity: np.ndarray
    psi: np.ndarray | None = None
    state: BoundState | None = None
    hidden: HiddenVariables | None = None
    mode: str = "time"
    status: str = "complete"
    meta: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    _dense: tuple | None = None

    def __len__(self):
        return len(self.t)

    @property
    def samples(self) -> list:
        return [TrajectoryState(float(a), float(b), float(c), float(d), tuple(int(v) for v in s))
                for a, b, c, d, s in zip(self.t, self.r, self.theta, self.phi, self.signs)]

    def cartesian(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.column_stack([self.r * st * np.cos(self.phi), self.r * st * np.sin(self.phi),
                                self.r * np.cos(self.theta)])

    def events_of(self, *kinds) -> list:
        kinds = {EventKind(k) for k in kinds}
        return [e for e in self.events if e.kind in kinds]

    def final_state(self) -> TrajectoryState:
        return TrajectoryState(float(self.t[-1]), float(self.r[-1]), float(self.theta[-1]), float(self.phi[-1]),
                               tuple(int(v) for v in self.signs[-1]))

    def at_time(self, t) -> np.ndarray:
        """Hermite-interpolated (r, theta, psi) at times ``t`` (time-domain runs only)."""
        if self._dense is None:
            raise ValueError("no dense output stored for this trajectory")
        tt, H, Y, FL, FR, chart = self._dense
        t = np.atleast_1d(np.asarray(t, dtype=float))
        i = np.clip(np.searchsorted(tt, t, side="right") - 1, 0, len(tt) - 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            th = np.where(H[i] > 0, (t - tt[i]) / H[i], 0.0)
        return self._hermite(i, np.clip(th, 0.0, 1.0))

    def dense_curve(self, per_step: int = 64) -> np.ndarray:
        """(r, theta, psi) sampled ``per_step`` times inside every accepted step."""
        if self._dense is None:
            raise ValueError("no dense output stored for this trajectory")
        n = len(self._dense[0]) - 1
        i = np.repeat(np.arange(n), per_step)
        th = np.tile(np.arange(per_step) / per_step, n)
        return np.vstack([self._hermite(i, th), self._hermite(np.array([n - 1]), np.array([1.0]))])

    def _hermite(self, i, th):
        tt, H, Y, FL, FR, chart = self._dense
        th = th[:, None]
        hh = H[i][:, None]
        y = ((1 + 2 * th) * (1 - th) ** 2 * Y[i] + th * (1 - th) ** 2 * hh * FR[i]
             + th * th * (3 - 2 * th) * Y[i + 1] + th * th * (th - 1) * hh * FL[i + 1])
        if self.mode == "angular":
            return np.column_stack([np.ones(len(y)), chart.theta_of(y[:, 0]), y[:, 1]])
        return np.column_stack([chart.r_of(y[:, 0]), chart.theta_of(y[:, 1]), y[:, 2]])


# -- geometry of the motion ---------------------------------------------------


def zone_roots(state: BoundState) -> tuple:
    """Roots r1 <= r2 of 2 E r^2 + 2 r - lam = 0 (r1 = 0 when lam = 0)."""
    E, lam = state.E, state.lam
    disc = 1.0 + 2.0 * E * lam
    if disc < 0:
        raise ValueError(f"state {state.label} has no trapping zone")
    r2 = (1.0 + math.sqrt(disc)) / (-2.0 * E)
    r1 = -lam / (2.0 * E * r2) if lam else 0.0
    return r1, r2


def polar_root(state: BoundState) -> float | None:
    """theta* in (0, pi/2) where lam = (m^2 - 1/4)/sin^2, if it exists."""
    lam, mq = state.lam, state.mq
    if 0.0 < mq < lam:
        return math.asin(math.sqrt(mq / lam))
    return None


def _logit(a, b):
    return math.log(a) - math.log(b)


def _sig(u):
    u = np.asarray(u, dtype=float)
    return np.where(u >= 0, 1.0 / (1.0 + np.exp(-np.abs(u))), np.exp(-np.abs(u)) / (1.0 + np.exp(-np.abs(u))))


@dataclass(frozen=True)
class Chart:
    """Coordinate maps for the radial region and polar band of one trajectory."""

    rreg: int  # 0: (lo, hi) zone, 1: (r2, inf), 2: (0, r1)
    r_lo: float
    r_hi: float
    preg: int  # 0: (0, pi), 1: (0, t*), 2: (t*, pi - t*), 3: (pi - t*, pi)
    t_lo: float
    t_hi: float
    t_sin: tuple  # exact (sin, cos) of t_lo and t_hi
    lo_is_root: bool
    hi_is_root: bool
    tlo_is_root: bool
    thi_is_root: bool

    def u_of(self, r: float) -> float:
        if self.rreg == 1:
            return math.log(r - self.r_lo)
        return _logit(r - self.r_lo, self.r_hi - r)

    def r_of(self, u):
        u = np.asarray(u, dtype=float)
        if self.rreg == 1:
            return self.r_lo + np.exp(u)
        w = self.r_hi - self.r_lo
        dl, dh = w * _sig(u), w * _sig(-u)
        return np.where(dl <= dh, self.r_lo + dl, self.r_hi - dh)

    def dr_du(self, u):
        u = np.asarray(u, dtype=float)
        if self.rreg == 1:
            return np.exp(u)
        w = self.r_hi - self.r_lo
        return w * _sig(u) * _sig(-u)

    def w_of(self, theta: float) -> float:
        return _logit(theta - self.t_lo, self.t_hi - theta)

    def theta_of(self, w):
        w = np.asarray(w, dtype=float)
        wd = self.t_hi - self.t_lo
        dl, dh = wd * _sig(w), wd * _sig(-w)
        return np.where(dl <= dh, self.t_lo + dl, self.t_hi - dh)

    def dtheta_dw(self, w):
        w = np.asarray(w, dtype=float)
        return (self.t_hi - self.t_lo) * _sig(w) * _sig(-w)


def make_chart(state: BoundState, r0: float, theta0: float) -> Chart:
    r1, r2 = zone_roots(state)
    if r0 > r2:
        rreg, lo, hi, lo_root, hi_root = 1, r2, math.inf, True, False
    elif state.lam and r0 < r1:
        rreg, lo, hi, lo_root, hi_root = 2, 0.0, r1, False, True
    else:
        rreg, lo, hi, lo_root, hi_root = 0, r1, r2, bool(state.lam), True
    ts = polar_root(state)
    if ts is None:
        preg, tlo, thi, tl_root, th_root = 0, 0.0, math.pi, False, False
        sc = (0.0, 1.0, 0.0, -1.0)
    else:
        s_star = math.sqrt(state.mq / state.lam)
        c_star = math.sqrt(1.0 - state.mq / state.lam)
        if theta0 < ts:
            preg, tlo, thi, tl_root, th_root = 1, 0.0, ts, False, True
            sc = (0.0, 1.0, s_star, c_star)
        elif theta0 > math.pi - ts:
            preg, tlo, thi, tl_root, th_root = 3, math.pi - ts, math.pi, True, False
            sc = (s_star, -c_star, 0.0, -1.0)
        else:
            preg, tlo, thi, tl_root, th_root = 2, ts, math.pi - ts, True, True
            sc = (s_star, c_star, s_star, -c_star)
    return Chart(rreg, lo, hi, preg, tlo, thi, sc, lo_root, hi_root, tl_root, th_root)


def radial_bracket(state: BoundState, r):
    """E - V(r) - lam/(2 r^2) with V = -1/r."""
    r = np.asarray(r, dtype=float)
    return state.E + 1.0 / r - state.lam / (2.0 * r * r)


def polar_bracket(state: BoundState, theta):
    """lam - (m^2 - 1/4)/sin^2(theta)."""
    s = np.sin(theta)
    return state.lam - state.mq / (s * s)


def velocity_field(state: BoundState, hidden: HiddenVariables, x: TrajectoryState) -> tuple:
    """(r', theta', phi') at ``x`` using the momentum signs ``x.signs``."""
    signs = x.signs or (1, 1, 1)
    cz, cl, cm = components(state, hidden, signs)
    r, th, ph = x.r, x.theta, x.phi
    s = np.sin(th)
    rdot = 2.0 * radial_bracket(state, r) / cz.momentum(r)
    tdot = polar_bracket(state, th) / (r * r * cl.momentum(th))
    pdot = state.mq / (r * r * s * s * cm.momentum(ph))
    return float(rdot), float(tdot), float(pdot)


def momentum_signs(state: BoundState, hidden: HiddenVariables, r0: float, theta0: float) -> tuple:
    """Momentum signs giving the initial directions stored in ``hidden``."""
    g = radial_bracket(state, r0)
    h = polar_bracket(state, theta0)
    sr = hidden.sign_r * (1 if g >= 0 else -1) * (1 if hidden.a_r > 0 else -1)
    st = hidden.sign_theta * (1 if h >= 0 else -1) * (1 if hidden.a_theta > 0 else -1)
    sp = hidden.sign_phi * (1 if state.mq > 0 else -1) * (1 if hidden.a_phi > 0 else -1)
    return int(sr), int(st), int(sp)


# -- problem setup shared by the integration modes ---------------------------


class _Problem:
    REBASE_R = (1e-2, 1e-3, 1e-4, 1e-5)
    REBASE_DR = 4.0

    def __init__(self, state, hidden, init, cfg):
        self.state, self.hidden, self.cfg = state, hidden, cfg
        self.r1, self.r2 = zone_roots(state)
        self.tstar = polar_root(state)
        self.start_events = []
        r0, th0 = float(init.r), float(init.theta)
        self.chart = make_chart(state, r0, th0)
        signs = list(init.signs) if init.signs is not None else list(momentum_signs(state, hidden, r0, th0))
        r0, signs[0], flip_r = self._clear_radial_start(r0, signs[0])
        th0, signs[1], flip_t = self._clear_polar_start(th0, signs[1])
        if flip_r or flip_t:
            self.start_events.append(EventKind.SIGN_FLIP)
        self.r0, self.theta0, self.phi0, self.t0 = r0, th0, float(init.phi), float(init.t)
        self.signs = signs
        self.cz, self.cl, self.cm = components(state, hidden, signs)
        self.psi0 = float(self.cm.reduced_action(self.phi0))
        self.rid = radial_catalog_id(state.n, state.l)
        self.pid = polar_catalog_id(state.l, state.m_l)
        self.radial_fn = None if self.rid >= 0 else self._make_radial_fn()
        self.polar_fn = None if self.pid >= 0 else self._make_polar_fn()

    def _make_radial_fn(self):
        pair = self.cz.pair
        return lambda r: tuple(float(v) for v in pair.values(r))

    def _make_polar_fn(self):
        pair = self.cl.pair
        return lambda t: tuple(float(v) for v in pair.values(t))

    def _radial_direction(self, sign_r, r):
        """+1 when r increases under momentum sign ``sign_r``."""
        g = radial_bracket(self.state, r)
        return int(np.sign(g) * sign_r * np.sign(self.hidden.a_r))

    def _clear_radial_start(self, r0, sr):
        ch, tol, guard = self.chart, self.cfg.turn_tol, self.cfg.r_min_guard
        flipped = False
        if ch.hi_is_root and r0 >= ch.r_hi - tol:
            r0 = ch.r_hi - tol
            if self._radial_direction(sr, r0) > 0:
                sr, flipped = -sr, True
        elif ch.lo_is_root and r0 <= ch.r_lo + tol:
            r0 = ch.r_lo + tol
            if self._radial_direction(sr, r0) < 0:
                sr, flipped = -sr, True
        elif not ch.lo_is_root and ch.rreg != 1 and r0 <= guard:
            r0 = guard
            if self._radial_direction(sr, r0) < 0:
                sr, flipped = -sr, True
        return r0, sr, flipped

    def _polar_direction(self, st, theta):
        h = polar_bracket(self.state, theta)
        return int(np.sign(h) * st * np.sign(self.hidden.a_theta))

    def _clear_polar_start(self, th0, st):
        ch, tol, guard = self.chart, self.cfg.turn_tol, self.cfg.theta_guard
        flipped = False
        hi_gap = tol if ch.thi_is_root else guard
        lo_gap = tol if ch.tlo_is_root else guard
        if th0 >= ch.t_hi - hi_gap:
            th0 = ch.t_hi - hi_gap
            if self._polar_direction(st, th0) > 0:
                st, flipped = -st, True
        elif th0 <= ch.t_lo + lo_gap:
            th0 = ch.t_lo + lo_gap
            if self._polar_direction(st, th0) < 0:
                st, flipped = -st, True
        return th0, st, flipped

    def params(self, signs, ubase=0.0, rfix=1.0):
        st, ch, h = self.state, self.chart, self.hidden
        P = np.zeros(core.N_PARAMS)
        P[P_E], P[P_LAM], P[P_MQ] = st.E, st.lam, st.mq
        P[P_RID], P[P_PID] = self.rid, self.pid
        P[P_AR], P[P_BR], P[P_SR] = h.a_r, h.b_r, signs[0]
        P[P_AT], P[P_BT], P[P_ST] = h.a_theta, h.b_theta, signs[1]
        P[P_R1], P[P_R2] = self.r1, self.r2
        P[P_RREG], P[P_RLO], P[P_RHI] = ch.rreg, ch.r_lo, (ch.r_hi if math.isfinite(ch.r_hi) else 0.0)
        P[P_PREG], P[P_TLO], P[P_THI] = ch.preg, ch.t_lo, ch.t_hi
        P[P_SLO], P[P_CLO], P[P_SHI], P[P_CHI] = ch.t_sin
        P[P_TSTAR] = self.tstar if self.tstar is not None else -1.0
        P[P_UBASE], P[P_RFIX] = ubase, rfix
        return P

    # event tables: (component index, value, direction, kind)
    def radial_end_values(self):
        """((u_lo, kind_lo), (u_hi, kind_hi)) in the chart's u coordinate."""
        ch, cfg = self.chart, self.cfg
        tol, guard = cfg.turn_tol, cfg.r_min_guard
        if ch.rreg == 1:
            return ((math.log(tol), EventKind.RADIAL_TURN),
                    (math.log(cfg.ejection_radius - ch.r_lo), EventKind.EJECTION))
        w = ch.r_hi - ch.r_lo
        if ch.lo_is_root:
            lo = (_logit(tol, w - tol), EventKind.RADIAL_TURN)
        else:
            lo = (_logit(guard, w - guard), EventKind.ORIGIN_APPROACH)
        hi = (_logit(w - tol, tol), EventKind.RADIAL_TURN)
        return lo, hi

    def radial_rebase_values(self):
        """(u, direction) rows that restart the kernel clock.

        Near the origin the motion takes ever shorter times; outside the zone
        the escape accelerates without bound.  Restarting at x = 0 keeps the
        kernel abscissa resolved in both cases.
        """
        ch = self.chart
        if ch.rreg == 1:
            span = self.cfg.ejection_radius - ch.r_lo
            return [(math.log(d), 1) for d in np.arange(self.REBASE_DR, span, self.REBASE_DR)]
        if ch.lo_is_root:
            return []
        w = ch.r_hi - ch.r_lo
        return [(_logit(d, w - d), -1) for d in self.REBASE_R if self.cfg.r_min_guard < d < 0.25 * w]

    def polar_end_values(self):
        ch, cfg = self.chart, self.cfg
        w = ch.t_hi - ch.t_lo
        gap_lo = cfg.turn_tol if ch.tlo_is_root else cfg.theta_guard
        gap_hi = cfg.turn_tol if ch.thi_is_root else cfg.theta_guard
        lo = (_logit(gap_lo, w - gap_lo), EventKind.POLAR_TURN if ch.tlo_is_root else EventKind.POLE_PASS)
        hi = (_logit(w - gap_hi, gap_hi), EventKind.POLAR_TURN if ch.thi_is_root else EventKind.POLE_PASS)
        return lo, hi

    def polar_rebase_values(self):
        ch = self.chart
        w = ch.t_hi - ch.t_lo
        out = []
        for d in self.REBASE_R:
            if not self.cfg.theta_guard < d < 0.25 * w:
                continue
            if not ch.tlo_is_root:
                out.append((_logit(d, w - d), -1))
            if not ch.thi_is_root:
                out.append((_logit(w - d, d), 1))
        return out

    def velocities(self, Y, F, signs, mode):
        """(r', theta', phi') from kernel derivatives in chart coordinates."""
        ch = self.chart
        if mode == "angular":
            rdot = np.zeros(len(Y))
            tdot = F[:, 0] * ch.dtheta_dw(Y[:, 0])
            psidot = F[:, 1]
            phi = azimuthal_angle(self.cm, Y[:, 1])
        else:
            rdot = F[:, 0] * ch.dr_du(Y[:, 0])
            tdot = F[:, 1] * ch.dtheta_dw(Y[:, 1])
            psidot = F[:, 2]
            phi = azimuthal_angle(self.cm, Y[:, 2])
        pdot = psidot / self.cm.momentum(phi)
        return np.column_stack([rdot, tdot, pdot])


def _run(cfg, problem, mode, P, y, x_end, events):
    idx = np.array([e[0] for e in events], dtype=np.int64)
    val = np.array([e[1] for e in events], dtype=float)
    dirs = np.array([e[2] for e in events], dtype=np.int64)
    return core.integrate(mode, P, 0.0, np.asarray(y, dtype=float), x_end, cfg.rel_tol, cfg.abs_tol, 0.0,
                          cfg.max_step, cfg.max_steps, idx, val, dirs, cfg.event_refine_tol,
                          problem.radial_fn, problem.polar_fn, None, cfg.backend)


def _time_events(problem, angular=False):
    """Event rows (index, value, direction, kind, coordinate) for the time modes."""
    rows = []
    k_w = 0 if angular else 1
    if not angular:
        (ulo, klo), (uhi, khi) = problem.radial_end_values()
        rows.append((0, ulo, -1, klo, "r"))
        rows.append((0, uhi, 1, khi, "r"))
        for v, d in problem.radial_rebase_values():
            rows.append((0, v, d, None, "r"))
    (wlo, klo), (whi, khi) = problem.polar_end_values()
    rows.append((k_w, wlo, -1, klo, "theta"))
    rows.append((k_w, whi, 1, khi, "theta"))
    for v, d in problem.polar_rebase_values():
        rows.append((k_w, v, d, None, "theta"))
    return rows


class _Collector:
    """Accumulates samples across kernel segments joined at events.

    Step lengths are kept from the segment-local abscissa, because absolute
    time cannot resolve the very short steps taken next to the origin.
    """

    def __init__(self):
        self.t, self.H, self.Y, self.FL, self.FR, self.signs = [], [], [], [], [], []

    def add(self, t_base, xs, ys, fl, fr, signs):
        xs = np.asarray(xs, dtype=float)
        if self.t:
            # first sample repeats the previous segment's last one
            self.set_right(fr[0], signs)
            self.H.append(np.diff(xs))
            xs, ys, fl, fr = xs[1:], ys[1:], fl[1:], fr[1:]
        else:
            self.H.append(np.diff(xs))
        self.t.append(t_base + xs)
        self.Y.append(np.asarray(ys, dtype=float))
        self.FL.append(np.asarray(fl, dtype=float))
        self.FR.append(np.array(fr, dtype=float))
        self.signs.append(np.tile(np.asarray(signs, dtype=int), (len(xs), 1)))

    def set_right(self, fr, signs):
        for chunk in (self.FR, self.signs):
            if len(chunk[-1]) == 0:
                raise RuntimeError("empty segment")
        self.FR[-1][-1] = fr
        self.signs[-1][-1] = signs

    def dense(self):
        return (np.concatenate(self.t), np.concatenate(self.H), np.concatenate(self.Y), np.concatenate(self.FL),
                np.concatenate(self.FR))

    def arrays(self):
        """Public samples with strictly increasing absolute time."""
        t = np.concatenate(self.t)
        # equal times are below the resolution of absolute time: the later state wins
        k = np.append(t[1:] > t[:-1], True)
        return (t[k], np.concatenate(self.Y)[k], np.concatenate(self.FL)[k], np.concatenate(self.FR)[k],
                np.concatenate(self.signs)[k])


def _stop_reached(cfg, n_radial_reversals):
    return cfg.radial_periods is not None and n_radial_reversals >= 2 * cfg.radial_periods


def _wrap_events(problem, t, psi, r, theta):
    """AzimuthalWrap events where phi passes through infinity (m = 0)."""
    if problem.state.m_l != 0 or len(t) < 2:
        return []
    s = problem.cm.sign
    k = np.floor((s * psi - 0.5 * np.pi) / np.pi)
    out = []
    for i in np.nonzero(np.diff(k) != 0)[0]:
        target = (min(k[i], k[i + 1]) + 1) * np.pi + 0.5 * np.pi
        frac = (target - s * psi[i]) / (s * psi[i + 1] - s * psi[i])
        tt = t[i] + frac * (t[i + 1] - t[i])
        out.append(Event(float(tt), EventKind.AZIMUTHAL_WRAP, float(r[i]), float(theta[i]), math.inf))
    return out


def integrate_time_trajectory(state: BoundState, hidden: HiddenVariables, init: TrajectoryState | None = None,
                              cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate the time-domain system from ``init`` until ``cfg.t_end``.

    Stops early on ejection or after ``cfg.radial_periods`` radial periods.
    Raises :class:`IntegrationStall` (with the partial trajectory) when the
    step size underflows.
    """
    cfg = cfg or IntegratorConfig()
    init = init or TrajectoryState()
    pb = _Problem(state, hidden, init, cfg)
    rows = _time_events(pb)
    ch = pb.chart
    y = [ch.u_of(pb.r0), ch.w_of(pb.theta0), pb.psi0]
    signs = list(pb.signs)
    col = _Collector()
    events = []
    t_base = pb.t0
    status = "complete"
    n_rev = 0
    n_events = 0
    for kind in pb.start_events:
        events.append((pb.t0, kind, tuple(y)))
    while True:
        P = pb.params(signs)
        xs, ys, fl, fr, code, ev = _run(cfg, pb, core.MODE_TIME, P, y, cfg.t_end - t_base, rows)
        col.add(t_base, xs, ys, fl, fr, signs)
        y = list(ys[-1])
        t_here = t_base + xs[-1]
        if code == core.DONE:
            break
        if code != core.EVENT:
            status = {core.STALL: "stalled", core.MAX_STEPS: "max-steps", core.NONFINITE: "non-finite"}[code]
            break
        kind = rows[ev][3]
        t_base = t_here
        if kind is None:
            continue
        n_events += 1
        events.append((t_here, kind, tuple(y)))
        if kind is EventKind.EJECTION:
            status = "ejected"
            break
        if rows[ev][4] == "r":
            signs[0] = -signs[0]
            n_rev += 1
        else:
            signs[1] = -signs[1]
        # the post-flip derivative is the right-hand limit at the event
        col.set_right(_rhs_once(pb, core.MODE_TIME, pb.params(signs), y, cfg), signs)
        if _stop_reached(cfg, n_rev) or n_events >= cfg.max_events:
            break
    traj = _assemble(pb, col, events, "time", status)
    if status in ("stalled", "non-finite", "max-steps"):
        raise IntegrationStall(f"time integration stopped: {status} at t={traj.t[-1]:.6g}", traj)
    return traj


def _rhs_once(pb, mode, P, y, cfg):
    xs, ys, fl, fr, code, ev = core.integrate(mode, P, 0.0, np.asarray(y, dtype=float), 0.0, cfg.rel_tol,
                                              cfg.abs_tol, 0.0, 0.0, 1, np.zeros(0, dtype=np.int64), np.zeros(0),
                                              np.zeros(0, dtype=np.int64), cfg.event_refine_tol, pb.radial_fn,
                                              pb.polar_fn, None, cfg.backend)
    return fl[0]


def _assemble(pb, col, events, mode, status):
    t, Y, FL, FR, signs = col.arrays()
    ch = pb.chart
    if mode == "angular":
        r = np.ones(len(t))
        theta = ch.theta_of(Y[:, 0])
        psi = Y[:, 1]
    else:
        r = ch.r_of(Y[:, 0])
        theta = ch.theta_of(Y[:, 1])
        psi = Y[:, 2]
    phi = azimuthal_angle(pb.cm, psi)
    vel = pb.velocities(Y, FR, signs, mode)
    ev_list = []
    for te, kind, ye in events:
        if mode == "angular":
            re, the, pse = 1.0, float(ch.theta_of(ye[0])), ye[1]
        else:
            re, the, pse = float(ch.r_of(ye[0])), float(ch.theta_of(ye[1])), ye[2]
        ev_list.append(Event(float(te), kind, re, the, float(azimuthal_angle(pb.cm, pse))))
    ev_list += _wrap_events(pb, t, psi, r, theta)
    ev_list.sort(key=lambda e: e.t)
    meta = {"r1": pb.r1, "r2": pb.r2, "theta_star": pb.tstar, "initial_signs": tuple(pb.signs),
            "origin_policy": "reflect", "backend": pb.cfg.backend or core.default_backend()}
    return Trajectory(t, r, theta, phi, ev_list, signs, vel, psi, pb.state, pb.hidden, mode, status, meta,
                      {}, col.dense() + (ch,))


def integrate_spatial_orbit(state: BoundState, hidden: HiddenVariables, init: TrajectoryState | None = None,
                            cfg: IntegratorConfig | None = None, segments: int = 2,
                            max_residual: float = 1e-4) -> Trajectory:
    """March theta and the azimuthal phase with r as the parameter.

    Each radial segment runs between turning points (or the origin guard);
    ``segments`` of them are chained, with the radial momentum sign flipped at
    every junction.  The phase relation that is not integrated is carried as
    an extra quadrature and its mismatch is stored in
    ``extra["eq80_residual"]``.
    """
    cfg = cfg or IntegratorConfig()
    init = init or TrajectoryState()
    pb = _Problem(state, hidden, init, cfg)
    ch = pb.chart
    (ulo, klo), (uhi, khi) = pb.radial_end_values()
    rows = []
    (wlo, kwlo), (whi, kwhi) = pb.polar_end_values()
    rows.append((0, wlo, -1, kwlo, "theta"))
    rows.append((0, whi, 1, kwhi, "theta"))
    for v, d in pb.polar_rebase_values():
        rows.append((0, v, d, None, "theta"))
    u = ch.u_of(pb.r0)
    y = [ch.w_of(pb.theta0), pb.psi0, pb.t0, pb.psi0]
    signs = list(pb.signs)
    rec_u, rec_y, events = [], [], []
    rec_s = []
    for kind in pb.start_events:
        events.append((pb.t0, kind, (u, y[0], y[1])))
    done = 0
    status = "complete"
    n_events = 0
    while done < segments:
        up = pb._radial_direction(signs[0], float(ch.r_of(u))) > 0
        target, kind_end = (uhi, khi) if up else (ulo, klo)
        P = pb.params(signs, ubase=u)
        xs, ys, fl, fr, code, ev = _run(cfg, pb, core.MODE_SPATIAL, P, y, target - u, rows)
        start = 1 if rec_u else 0
        rec_u.extend(u + xs[start:])
        rec_y.extend(ys[start:])
        rec_s.extend([tuple(signs)] * (len(xs) - start))
        y = list(ys[-1])
        if code == core.EVENT:
            u = u + xs[-1]
            kind = rows[ev][3]
            if kind is not None:
                signs[1] = -signs[1]
                rec_s[-1] = tuple(signs)
                events.append((y[2], kind, (u, y[0], y[1])))
                n_events += 1
            if n_events > cfg.max_events:
                status = "max-events"
                break
            continue
        if code != core.DONE:
            status = {core.STALL: "stalled", core.MAX_STEPS: "max-steps", core.NONFINITE: "non-finite"}[code]
            break
        u = target
        events.append((y[2], kind_end, (u, y[0], y[1])))
        if kind_end is EventKind.EJECTION:
            status = "ejected"
            break
        signs[0] = -signs[0]
        rec_s[-1] = tuple(signs)
        done += 1
        if y[2] >= cfg.t_end:
            break
    U = np.asarray(rec_u)
    Yv = np.asarray(rec_y)
    order = np.concatenate([[True], np.diff(Yv[:, 2]) > 0])
    U, Yv = U[order], Yv[order]
    S = np.asarray(rec_s, dtype=int)[order]
    t = Yv[:, 2]
    r = ch.r_of(U)
    theta = ch.theta_of(Yv[:, 0])
    psi = Yv[:, 1]
    phi = azimuthal_angle(pb.cm, psi)
    resid = np.abs(psi - Yv[:, 3])
    ev_list = [Event(float(te), kind, float(ch.r_of(ye[0])), float(ch.theta_of(ye[1])),
                     float(azimuthal_angle(pb.cm, ye[2]))) for te, kind, ye in events]
    ev_list += _wrap_events(pb, t, psi, r, theta)
    ev_list.sort(key=lambda e: e.t)
    vel = np.full((len(t), 3), np.nan)
    meta = {"r1": pb.r1, "r2": pb.r2, "theta_star": pb.tstar, "initial_signs": tuple(pb.signs),
            "origin_policy": "reflect", "segments": done}
    traj = Trajectory(t, r, theta, phi, ev_list, S, vel, psi, state, hidden, "spatial", status, meta,
                      {"eq80_residual": resid, "u": U})
    if status in ("stalled", "non-finite", "max-steps", "max-events"):
        raise IntegrationStall(f"spatial integration stopped: {status}", traj)
    if resid.max() > max_residual:
        raise ArithmeticError(f"third-equation residual {resid.max():.3g} exceeds {max_residual:g}")
    return traj


def angular_trajectory(state: BoundState, hidden: HiddenVariables, theta_0: float = 0.5 * np.pi,
                       phi_0: float = 0.0, cfg: IntegratorConfig | None = None, polar_events: int | None = None,
                       return_trajectory: bool = False):
    """theta(phi) curve independent of r; returns a list of (phi, theta).

    Integration runs with r frozen at 1 until ``cfg.t_end`` or until
    ``polar_events`` turning/pole events have been logged.
    """
    cfg = cfg or IntegratorConfig()
    pb = _Problem(state, hidden, TrajectoryState(0.0, 1.0, theta_0, phi_0), cfg)
    rows = _time_events(pb, angular=True)
    y = [pb.chart.w_of(pb.theta0), pb.psi0]
    signs = list(pb.signs)
    col = _Collector()
    events = []
    t_base = 0.0
    status = "complete"
    n = 0
    for kind in pb.start_events:
        events.append((0.0, kind, tuple(y)))
    while True:
        P = pb.params(signs)
        xs, ys, fl, fr, code, ev = _run(cfg, pb, core.MODE_ANGULAR, P, y, cfg.t_end - t_base, rows)
        col.add(t_base, xs, ys, fl, fr, signs)
        y = list(ys[-1])
        t_base = t_base + xs[-1]
        if code == core.DONE:
            break
        if code != core.EVENT:
            status = "stalled"
            break
        kind = rows[ev][3]
        if kind is None:
            continue
        signs[1] = -signs[1]
        col.set_right(_rhs_once(pb, core.MODE_ANGULAR, pb.params(signs), y, cfg), signs)
        events.append((t_base, kind, tuple(y)))
        n += 1
        if (polar_events is not None and n >= polar_events) or n >= cfg.max_events:
            break
    traj = _assemble(pb, col, events, "angular", status)
    if status != "complete":
        raise IntegrationStall("angular integration stalled", traj)
    if return_trajectory:
        return traj
    return list(zip(traj.phi.tolist(), traj.theta.tolist()))


def reverse_state(traj: Trajectory) -> TrajectoryState:
    """Final state of ``traj`` with all three momentum signs flipped."""
    fs = traj.final_state()
    return replace(fs, signs=tuple(-s for s in fs.signs))
