"""Numerical checks of the separated and combined quantum Hamilton-Jacobi
equations and of the metric-tensor form of the law of motion.

Each check returns a :class:`ResidualReport`.  Everything is evaluated on
deterministic grids, so repeated calls give identical reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import BoundState, SolutionPair
from .momenta import (HiddenVariables, azimuthal_component, components, polar_component,
                      qshje_residual, radial_component)
from .quantum_dynamics import Trajectory, zone_roots

COMPONENT_TOL = 1e-6
FULL_TOL = 1e-5
METRIC_TOL = 1e-6
ANGLE_GUARD = 0.05


@dataclass(frozen=True)
class ResidualReport:
    """Outcome of one check; ``passed`` is ``max_abs <= tolerance``."""

    check_id: str
    grid: str
    max_abs: float
    rms: float
    passed: bool
    tolerance: float
    excluded: int = 0
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.passed != bool(self.max_abs <= self.tolerance):
            raise ValueError("passed must equal max_abs <= tolerance")

    @classmethod
    def from_values(cls, check_id: str, grid: str, values, tolerance: float, excluded: int = 0,
                    details: dict | None = None) -> "ResidualReport":
        v = np.abs(np.asarray(values, dtype=float)).ravel()
        if v.size == 0:
            mx, rms = np.inf, np.inf
        elif not np.all(np.isfinite(v)):
            mx, rms = np.inf, np.inf
        else:
            mx, rms = float(v.max()), float(np.sqrt(np.mean(v * v)))
        return cls(check_id, grid, mx, rms, bool(mx <= tolerance), tolerance, excluded, details or {})

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        extra = f" excluded={self.excluded}" if self.excluded else ""
        return f"{flag} {self.check_id}: max_abs={self.max_abs:.3e} rms={self.rms:.3e} tol={self.tolerance:g}{extra}"


@dataclass(frozen=True)
class Grid:
    """Tensor grid in (r, theta, phi); r log-spaced, angles uniform inside guards."""

    r: np.ndarray
    theta: np.ndarray
    phi: np.ndarray

    @classmethod
    def default(cls, state: BoundState, shape=(64, 32, 16), r_range=None, guard: float = ANGLE_GUARD) -> "Grid":
        nr, nt, nph = shape
        lo, hi = r_range or (0.05, 4.0 * zone_roots(state)[1])
        return cls(np.geomspace(lo, hi, nr), np.linspace(guard, np.pi - guard, nt),
                   np.linspace(guard, 2.0 * np.pi - guard, nph))

    def describe(self) -> str:
        return (f"{len(self.r)}x{len(self.theta)}x{len(self.phi)} r in [{self.r[0]:.4g}, {self.r[-1]:.4g}] log, "
                f"theta in [{self.theta[0]:.4g}, {self.theta[-1]:.4g}], phi in [{self.phi[0]:.4g}, {self.phi[-1]:.4g}]")


def verify_component_qshje(state: BoundState, hidden: HiddenVariables, grid: Grid | None = None,
                           radial_pair: SolutionPair | None = None, tolerance: float = COMPONENT_TOL) -> list:
    """Residuals of the radial, polar and azimuthal equations on ``grid``.

    ``radial_pair`` substitutes the radial solutions, which is how the
    negative control with a wronskian other than one is run.
    """
    g = grid or Grid.default(state)
    comps = (radial_component(state, hidden, pair=radial_pair), polar_component(state, hidden),
             azimuthal_component(state, hidden))
    out = []
    for name, comp, q in zip(("radial", "polar", "azimuthal"), comps, (g.r, g.theta, g.phi)):
        res = qshje_residual(comp, q, state)
        desc = f"{len(q)} points in [{q[0]:.4g}, {q[-1]:.4g}]"
        out.append(ResidualReport.from_values(f"component-{name}", desc, res, tolerance))
    return out


def full_qshje_terms(state: BoundState, hidden: HiddenVariables, r, theta, phi, hbar2: float = 1.0,
                     comps: tuple | None = None) -> dict:
    """Terms of the combined equation for S0 = Z + L + M, broadcast over the inputs.

    ``kinetic`` is |grad S0|^2 / 2, ``schwarzian`` the weighted Schwarzian
    sum times hbar^2 / 4, ``r_term`` and ``sin_term`` the two -hbar^2/(8 r^2)
    corrections.  ``residual`` is their sum plus V - E.
    """
    cz, cl, cm = comps or components(state, hidden)
    r, theta, phi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, theta, phi)))
    ir2 = 1.0 / (r * r)
    is2 = 1.0 / np.sin(theta) ** 2
    pz, pl, pm = cz.momentum(r), cl.momentum(theta), cm.momentum(phi)
    kinetic = 0.5 * (pz * pz + ir2 * pl * pl + ir2 * is2 * pm * pm)
    sch = 0.25 * hbar2 * (cz.schwarzian(r) + ir2 * cl.schwarzian(theta) + ir2 * is2 * cm.schwarzian(phi))
    r_term = -0.125 * hbar2 * ir2
    sin_term = r_term * is2
    V = -1.0 / r
    residual = kinetic + sch + V + r_term + sin_term - state.E
    return {"kinetic": kinetic, "schwarzian": sch, "r_term": r_term, "sin_term": sin_term, "V": V,
            "residual": residual}


def verify_full_qshje(state: BoundState, hidden: HiddenVariables, hbar2: float = 1.0, grid: Grid | None = None,
                      tolerance: float = FULL_TOL) -> ResidualReport:
    """Residual of the three-dimensional equation assembled from S0 = Z + L + M.

    The quantum corrections carry an explicit factor ``hbar2``; with
    ``hbar2 = 0`` they vanish and the checked equation is the classical one,
    which the quantum momenta do not satisfy.  ``details['quantum_terms']``
    is the largest correction magnitude.
    """
    g = grid or Grid.default(state)
    R, T, P = np.meshgrid(g.r, g.theta, g.phi, indexing="ij")
    terms = full_qshje_terms(state, hidden, R, T, P, hbar2)
    q = np.abs(terms["schwarzian"]) + np.abs(terms["r_term"]) + np.abs(terms["sin_term"])
    details = {"quantum_terms": float(q.max()), "hbar2": hbar2}
    return ResidualReport.from_values("full-qshje" if hbar2 == 1.0 else f"full-qshje[hbar2={hbar2:g}]",
                                      g.describe(), terms["residual"], tolerance, details=details)


def _trajectory_momenta(traj: Trajectory, state: BoundState, hidden: HiddenVariables) -> np.ndarray:
    """(dZ/dr, dL/dtheta, dM/dphi) at every sample with the recorded signs."""
    if traj.mode == "classical":
        pr, pt = traj.extra["p_r"], traj.extra["p_theta"]
        pf = np.full(len(traj.t), traj.meta["p_phi"])
        return np.column_stack([pr, pt, pf])
    cz, cl, cm = components(state, hidden)
    sg = np.asarray(traj.signs)
    return np.column_stack([sg[:, 0] * cz.momentum(traj.r), sg[:, 1] * cl.momentum(traj.theta),
                            sg[:, 2] * cm.momentum(traj.phi)])


def law_of_motion_residual(traj: Trajectory, state: BoundState | None, hidden: HiddenVariables | None,
                           potential=None) -> np.ndarray:
    """Per-sample relative residual of r' Z' + theta' L' + phi' M' = 2 (E - V).

    Normalized by the sum of the magnitudes of the four terms.  Classical
    orbits carry their own momenta and energy, so ``state`` and ``hidden``
    may be None for them.
    """
    p = _trajectory_momenta(traj, state, hidden)
    v = np.asarray(traj.velocity)
    V = -1.0 / traj.r if potential is None else potential(traj.r)
    E = traj.meta["E"] if traj.mode == "classical" else state.E
    terms = v * p
    rhs = 2.0 * (E - V)
    scale = np.abs(terms).sum(axis=1) + np.abs(rhs)
    return (terms.sum(axis=1) - rhs) / np.where(scale > 0, scale, 1.0)


def metric_components(traj: Trajectory, state: BoundState, hidden: HiddenVariables, turn_tol: float = 1e-6):
    """Reconstruct (a_rr, a_tt, a_pp) = momentum / (r^2-weighted velocity).

    Returns the (n, 3) array and a mask of the samples kept.  A sample is a
    turning sample, and is masked out, when some product velocity * momentum
    falls below ``turn_tol`` times the size of the terms of its own
    separated equation (2 (|E| + |V|) + lam/r^2 radially, (lam + |m^2 - 1/4|/sin^2)/r^2
    for both angles).
    """
    p = _trajectory_momenta(traj, state, hidden)
    v = np.asarray(traj.velocity, dtype=float)
    r, th = traj.r, traj.theta
    r2 = r * r
    s2 = np.sin(th) ** 2
    w = np.column_stack([v[:, 0], r2 * v[:, 1], r2 * s2 * v[:, 2]])
    if traj.mode == "classical":
        E, lam, mq = traj.meta["E"], traj.meta["alpha"], traj.meta["beta"] ** 2
    else:
        E, lam, mq = state.E, state.lam, state.mq
    ang = (lam + abs(mq) / s2) / r2
    scale = np.column_stack([2.0 * (abs(E) + 1.0 / r) + lam / r2, ang, ang])
    with np.errstate(invalid="ignore"):
        keep = np.all(np.abs(v * p) > turn_tol * scale, axis=1) & np.all(np.isfinite(v), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(keep[:, None], p / w, np.nan)
    return a, keep


def _closed_form_metric(traj, state, hidden, hbar2):
    """1 / (1 + hbar^2/2 p^-2 ({S, q} - c)) with c = 0, 1/2, 1/2."""
    if traj.mode == "classical":
        return np.ones((len(traj.t), 3))
    comps = components(state, hidden)
    out = []
    for comp, q, c in zip(comps, (traj.r, traj.theta, traj.phi), (0.0, 0.5, 0.5)):
        p = comp.momentum(q)
        out.append(1.0 / (1.0 + 0.5 * hbar2 * (comp.schwarzian(q) - c) / (p * p)))
    return np.column_stack(out)


def verify_metric_identities(traj: Trajectory, state: BoundState, hidden: HiddenVariables, hbar2: float = 1.0,
                             turn_tol: float = 1e-6, tolerance: float = METRIC_TOL) -> ResidualReport:
    """Metric components from velocities and momenta, checked three ways.

    With a = momentum / (weighted velocity) per coordinate the check
    evaluates, at every sample away from turning points,

    * the energy form  (a_rr r'^2 + a_tt r^2 theta'^2 + a_pp r^2 sin^2 phi'^2)/2 + V = E,
    * the momentum form  Z'^2/a_rr + L'^2/(r^2 a_tt) + M'^2/(r^2 sin^2 a_pp) = 2 (E - V),
    * agreement of each a with its closed form in terms of the Schwarzian
      (identically one for a classical orbit).

    All three are relative residuals.  ``excluded`` counts the turning
    samples dropped by the division guard.
    """
    a, keep = metric_components(traj, state, hidden, turn_tol)
    p = _trajectory_momenta(traj, state, hidden)[keep]
    v = np.asarray(traj.velocity)[keep]
    a = a[keep]
    r, th = traj.r[keep], traj.theta[keep]
    E = traj.meta["E"] if traj.mode == "classical" else state.E
    V = -1.0 / r
    r2, s2 = r * r, np.sin(th) ** 2
    kin = 0.5 * np.column_stack([a[:, 0] * v[:, 0] ** 2, a[:, 1] * r2 * v[:, 1] ** 2, a[:, 2] * r2 * s2 * v[:, 2] ** 2])
    energy = (kin.sum(axis=1) + V - E) / (np.abs(kin).sum(axis=1) + np.abs(V) + abs(E))
    mom = np.column_stack([p[:, 0] ** 2 / a[:, 0], p[:, 1] ** 2 / (r2 * a[:, 1]), p[:, 2] ** 2 / (r2 * s2 * a[:, 2])])
    momentum = (mom.sum(axis=1) - 2.0 * (E - V)) / (np.abs(mom).sum(axis=1) + 2.0 * np.abs(E - V))
    closed = _closed_form_metric(traj, state, hidden, hbar2)[keep]
    metric = np.abs(a - closed) / np.maximum(1.0, np.abs(closed))
    worst = np.concatenate([np.abs(energy), np.abs(momentum), metric.max(axis=1) if len(metric) else []])
    details = {
        "energy_form": float(np.abs(energy).max()) if len(energy) else np.nan,
        "momentum_form": float(np.abs(momentum).max()) if len(momentum) else np.nan,
        "closed_form": float(metric.max()) if len(metric) else np.nan,
        "max_metric_deviation_from_one": float(np.abs(a - 1.0).max()) if len(a) else np.nan,
    }
    grid = f"{int(keep.sum())} of {len(keep)} samples along a {traj.mode} trajectory"
    return ResidualReport.from_values("metric-identities", grid, worst, tolerance, int((~keep).sum()), details)


def verify_all(state: BoundState, hidden: HiddenVariables, traj: Trajectory | None = None) -> list:
    """Component, combined and (when ``traj`` is given) metric reports."""
    out = verify_component_qshje(state, hidden)
    out.append(verify_full_qshje(state, hidden))
    if traj is not None:
        out.append(verify_metric_identities(traj, state, hidden))
    return out


__all__ = ["ResidualReport", "Grid", "verify_component_qshje", "full_qshje_terms", "verify_full_qshje",
           "metric_components", "verify_metric_identities", "verify_all", "law_of_motion_residual"]
