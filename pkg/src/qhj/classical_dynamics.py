"""Classical Hamilton-Jacobi motion in a central potential.

The separated equations give

    r'     = ±sqrt(2 (E - V) - alpha / r^2)
    theta' = ±sqrt(alpha - beta^2 / sin^2 theta) / r^2
    phi'   = ±beta / (r^2 sin^2 theta)

in internal units.  Integration uses the equivalent Hamiltonian system in
(r, p_r, theta, p_theta, phi), which is smooth through the turning points,
on the same kernel as the quantum integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import core
from .basis import BoundState
from .quantum_dynamics import Event, EventKind, IntegrationStall, IntegratorConfig, Trajectory, TrajectoryState


class ForbiddenRegionError(ValueError):
    """A radicand of the velocity field is negative at the requested point."""


class PurelyQuantumError(ValueError):
    """The state has no classical correspondent (beta^2 = m_l^2 - 1/4 < 0)."""


@dataclass(frozen=True)
class ClassicalParams:
    """Energy and separation constants; ``beta >= 0`` with direction in ``signs``.

    ``signs`` are the initial directions of motion along (r, theta, phi).
    """

    E: float
    alpha: float
    beta: float
    signs: tuple = (1, 1, 1)

    def __post_init__(self):
        if not (math.isfinite(self.E) and math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("classical parameters must be finite")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.beta < 0.0:
            raise ValueError("beta is stored non-negative; put the direction in signs")
        if self.alpha < self.beta**2:
            raise ValueError(f"alpha={self.alpha} < beta^2={self.beta**2}: polar motion impossible")
        if self.E >= 0.0:
            raise ValueError(f"bound orbits need E < 0, got {self.E}")
        if len(self.signs) != 3 or any(s not in (1, -1) for s in self.signs):
            raise ValueError("signs must be three values of +1 or -1")

    @classmethod
    def from_quantum(cls, state: BoundState, signs=(1, 1, 1)) -> "ClassicalParams":
        """alpha = l(l+1), beta = sqrt(m_l^2 - 1/4).  Refused for m_l = 0."""
        if state.m_l == 0:
            raise PurelyQuantumError(
                f"state {state.label} is purely quantum: beta^2 = m_l^2 - 1/4 = -0.25 < 0, "
                "so it cannot have a classical correspondent")
        return cls(state.E, float(state.lam), math.sqrt(state.mq), tuple(signs))

    @classmethod
    def figure1(cls) -> "ClassicalParams":
        """E of the first excited level, alpha = 2, beta = sqrt(3)/2."""
        return cls(-0.125, 2.0, math.sqrt(3.0) / 2.0)


def _coulomb(r):
    return -1.0 / np.asarray(r, dtype=float)


def radial_radicand(p: ClassicalParams, r, potential=None):
    """2 (E - V) - alpha / r^2."""
    r = np.asarray(r, dtype=float)
    V = _coulomb(r) if potential is None else potential(r)
    return 2.0 * (p.E - V) - p.alpha / (r * r)


def polar_radicand(p: ClassicalParams, theta):
    """alpha - beta^2 / sin^2 theta."""
    s = np.sin(theta)
    return p.alpha - p.beta**2 / (s * s)


def turning_radii(p: ClassicalParams) -> tuple:
    """Perihelion and aphelion for the Coulomb potential."""
    disc = 1.0 + 2.0 * p.E * p.alpha
    if disc < 0:
        raise ForbiddenRegionError("no allowed radial interval for these constants")
    r2 = (1.0 + math.sqrt(disc)) / (-2.0 * p.E)
    return p.alpha / (-2.0 * p.E * r2), r2


def polar_turning_angle(p: ClassicalParams) -> float:
    """theta in (0, pi/2] where the polar velocity vanishes."""
    return math.asin(math.sqrt(p.beta**2 / p.alpha))


def _root(value, name, slack=1e-12):
    if value < 0.0:
        if value > -slack:
            return 0.0
        raise ForbiddenRegionError(f"{name} radicand is negative ({value:.3g}): point is classically forbidden")
    return math.sqrt(value)


def classical_velocity_field(p: ClassicalParams, x: TrajectoryState, potential=None) -> tuple:
    """(r', theta', phi') at ``x``; directions from ``x.signs`` or ``p.signs``."""
    sr, st, sp = x.signs if x.signs is not None else p.signs
    r, th = float(x.r), float(x.theta)
    s = math.sin(th)
    rdot = sr * _root(float(radial_radicand(p, r, potential)), "radial")
    tdot = st * _root(float(polar_radicand(p, th)), "polar") / (r * r)
    pdot = sp * p.beta / (r * r * s * s)
    return rdot, tdot, pdot


def initial_momenta(p: ClassicalParams, init: TrajectoryState, potential=None) -> np.ndarray:
    """Kernel state (r, p_r, theta, p_theta, phi) for ``init``."""
    rdot, tdot, _ = classical_velocity_field(p, init, potential)
    r = float(init.r)
    return np.array([r, rdot, float(init.theta), r * r * tdot, float(init.phi)])


def angular_momentum_vector(p: ClassicalParams, init: TrajectoryState, potential=None) -> np.ndarray:
    """Specific angular momentum x × v at ``init``; its norm is sqrt(alpha)."""
    r, th, ph = float(init.r), float(init.theta), float(init.phi)
    rdot, tdot, pdot = classical_velocity_field(p, init, potential)
    st, ct, sp, cp = math.sin(th), math.cos(th), math.sin(ph), math.cos(ph)
    x = r * np.array([st * cp, st * sp, ct])
    e_r = np.array([st * cp, st * sp, ct])
    e_t = np.array([ct * cp, ct * sp, -st])
    e_p = np.array([-sp, cp, 0.0])
    v = rdot * e_r + r * tdot * e_t + r * st * pdot * e_p
    return np.cross(x, v)


def classical_orbit(p: ClassicalParams, init: TrajectoryState | None = None, cfg: IntegratorConfig | None = None,
                    potential=None, dvdr=None) -> Trajectory:
    """Integrate the classical motion from ``init``.

    Radial and polar turning points are logged as events.  Stops at
    ``cfg.t_end``, at ejection, or after ``cfg.radial_periods`` radial
    periods.  ``potential``/``dvdr`` replace the Coulomb potential (and force
    the Python kernel).
    """
    cfg = cfg or IntegratorConfig()
    if init is None:
        init = TrajectoryState(r=turning_radii(p)[0], theta=0.5 * math.pi)
    if (potential is None) != (dvdr is None):
        raise ValueError("potential and dvdr must be given together")
    y = initial_momenta(p, init, potential)
    pf = init.signs[2] * p.beta if init.signs is not None else p.signs[2] * p.beta
    P = np.zeros(core.N_PARAMS)
    P[0] = pf
    rows = [(1, 0.0, 0, EventKind.RADIAL_TURN), (3, 0.0, 0, EventKind.POLAR_TURN),
            (0, cfg.ejection_radius, 1, EventKind.EJECTION), (0, cfg.r_min_guard, -1, EventKind.ORIGIN_APPROACH)]
    idx = np.array([r[0] for r in rows], dtype=np.int64)
    val = np.array([r[1] for r in rows], dtype=float)
    dirs = np.array([r[2] for r in rows], dtype=np.int64)
    t_base = float(init.t)
    T, Y = [t_base], [y.copy()]
    events = []
    status = "complete"
    n_rad = 0
    while True:
        xs, ys, fl, fr, code, ev = core.integrate(core.MODE_CLASSICAL, P, 0.0, y, cfg.t_end - t_base, cfg.rel_tol,
                                                  cfg.abs_tol, 0.0, cfg.max_step, cfg.max_steps, idx, val, dirs,
                                                  cfg.event_refine_tol, dvdr=dvdr, backend=cfg.backend)
        T.extend(t_base + xs[1:])
        Y.extend(ys[1:])
        y = ys[-1].copy()
        t_base = t_base + xs[-1]
        if code == core.DONE:
            break
        if code != core.EVENT:
            status = {core.STALL: "stalled", core.MAX_STEPS: "max-steps", core.NONFINITE: "non-finite"}[code]
            break
        kind = rows[ev][3]
        s = math.sin(y[2])
        events.append(Event(t_base, kind, float(y[0]), float(y[2]), float(y[4])))
        if kind in (EventKind.EJECTION, EventKind.ORIGIN_APPROACH):
            status = "ejected" if kind is EventKind.EJECTION else "origin"
            break
        if kind is EventKind.RADIAL_TURN:
            n_rad += 1
            if cfg.radial_periods is not None and n_rad >= 2 * cfg.radial_periods:
                break
        if len(events) >= cfg.max_events or not math.isfinite(s):
            break
    T = np.asarray(T)
    Y = np.asarray(Y)
    r, pr, th, pt, ph = Y.T
    s2 = np.sin(th) ** 2
    vel = np.column_stack([pr, pt / (r * r), pf / (r * r * s2)])
    signs = np.column_stack([np.where(pr >= 0, 1, -1), np.where(pt >= 0, 1, -1), np.full(len(T), 1 if pf >= 0 else -1)])
    meta = {"E": p.E, "alpha": p.alpha, "beta": p.beta, "p_phi": pf}
    traj = Trajectory(T, r, th, ph, events, signs, vel, None, None, None, "classical", status, meta,
                      {"p_r": pr, "p_theta": pt})
    if status in ("stalled", "max-steps", "non-finite"):
        raise IntegrationStall(f"classical integration stopped: {status}", traj)
    return traj


def energy(traj: Trajectory, potential=None) -> np.ndarray:
    """(1/2)(r'^2 + r^2 theta'^2 + r^2 sin^2 theta phi'^2) + V(r) along ``traj``."""
    r, th = traj.r, traj.theta
    rd, td, pd = traj.velocity.T
    V = _coulomb(r) if potential is None else potential(r)
    return 0.5 * (rd**2 + (r * td) ** 2 + (r * np.sin(th) * pd) ** 2) + V


def orbit_equation_residuals(p: ClassicalParams, traj: Trajectory, potential=None) -> dict:
    """Max deviations of the orbit relations with denominators cleared.

    Checks r'^2 = 2(E - V) - alpha/r^2, (r^2 theta')^2 = alpha - beta^2/sin^2
    and r^2 sin^2 theta phi' = ±beta along the samples.
    """
    r, th = traj.r, traj.theta
    rd, td, pd = traj.velocity.T
    s2 = np.sin(th) ** 2
    return {
        "radial": float(np.max(np.abs(rd**2 - radial_radicand(p, r, potential)))),
        "polar": float(np.max(np.abs((r * r * td) ** 2 - polar_radicand(p, th)))),
        "azimuthal": float(np.max(np.abs(np.abs(r * r * s2 * pd) - p.beta))),
    }


def radial_period(traj: Trajectory) -> float:
    """Time between two consecutive turning events of the same kind."""
    turns = [e.t for e in traj.events_of(EventKind.RADIAL_TURN)]
    if abs(traj.velocity[0, 0]) < 1e-9:
        turns.insert(0, float(traj.t[0]))
    if len(turns) < 3:
        raise ValueError("need two same-kind radial turning points")
    return turns[2] - turns[0]


def closure_gap(traj: Trajectory) -> float:
    """Cartesian distance between the first and last samples."""
    xyz = traj.cartesian()
    return float(np.linalg.norm(xyz[-1] - xyz[0]))


def planarity(traj: Trajectory, normal) -> float:
    """max |n · x(t)| with ``normal`` normalized."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    return float(np.max(np.abs(traj.cartesian() @ n)))
