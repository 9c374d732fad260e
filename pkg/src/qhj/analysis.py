"""Trapping zones, node detection over trajectory ensembles and ejection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .basis import BoundState
from .momenta import HiddenVariables
from .quantum_dynamics import (EventKind, IntegrationStall, IntegratorConfig, Trajectory, TrajectoryState,
                               integrate_time_trajectory)


class UnboundStateError(ValueError):
    pass


class IndeterminateError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrapZone:
    r1: float
    r2: float
    contains_origin: bool
    state: BoundState

    def __post_init__(self):
        if not 0.0 <= self.r1 < self.r2:
            raise ValueError(f"invalid zone ({self.r1}, {self.r2})")

    def contains(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return (r > self.r1) & (r < self.r2)

    @property
    def roots(self) -> tuple:
        return (self.r2,) if self.contains_origin else (self.r1, self.r2)


def trap_zone(state: BoundState, potential=None, r_max: float | None = None) -> TrapZone:
    """Interval where E - V(r) - l(l+1)/(2 r^2) > 0.

    Roots of 2 r^2 (E - V) - l(l+1) are bracketed on a logarithmic grid and
    refined with Brent's method.  ``potential`` defaults to -1/r.
    """
    E, lam = state.E, float(state.lam)
    V = (lambda r: -1.0 / r) if potential is None else potential

    def g(r):
        return 2.0 * r * r * (E - V(r)) - lam

    r_max = r_max or 200.0 * state.n**2
    grid = np.geomspace(1e-8, r_max, 4001)
    vals = np.array([g(r) for r in grid])
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(brentq(g, grid[i], grid[i + 1], xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))
    if lam == 0 and vals[0] > 0 and roots:
        return TrapZone(0.0, roots[0], True, state)
    if len(roots) >= 2:
        return TrapZone(roots[0], roots[1], False, state)
    raise UnboundStateError(f"state {state.label}: no bounded allowed radial interval")


def expected_node_count(state: BoundState) -> tuple:
    """Node count and radii per the trapping-zone rule.

    Three nodes (the origin and two on the outer turning sphere) when the
    zone contains the origin, otherwise two (one on each turning sphere).
    """
    z = trap_zone(state)
    if z.contains_origin:
        return 3, (0.0, z.r2, z.r2)
    return 2, (z.r1, z.r2)


@dataclass(frozen=True)
class Node:
    position: tuple  # (r, theta, phi), or (r,) in radial mode
    support: int
    members: tuple = ()  # indices of the trajectories that pass

    @property
    def r(self) -> float:
        return float(self.position[0])


@dataclass
class NodeCatalog:
    nodes: list
    mode: str
    tolerance: float
    n_trajectories: int
    meta: dict = field(default_factory=dict)

    def common(self, min_fraction: float = 1.0) -> list:
        """Nodes visited by at least ``min_fraction`` of the ensemble."""
        need = math.ceil(min_fraction * self.n_trajectories - 1e-12)
        return [n for n in self.nodes if n.support >= need]

    def radii(self) -> list:
        return sorted(n.r for n in self.nodes)


def _radial_clusters(ensemble, tol, guard):
    pts = []
    for k, tr in enumerate(ensemble):
        for e in tr.events:
            if e.kind is EventKind.RADIAL_TURN:
                pts.append((e.r, k))
            elif e.kind is EventKind.ORIGIN_APPROACH:
                pts.append((0.0, k))
        if len(tr.r) and tr.r.min() <= guard:
            pts.append((0.0, k))
    pts.sort()
    clusters, cur = [], []
    for r, k in pts:
        if cur and r - cur[-1][0] > tol:
            clusters.append(cur)
            cur = []
        cur.append((r, k))
    if cur:
        clusters.append(cur)
    nodes = []
    for c in clusters:
        members = tuple(sorted({k for _, k in c}))
        nodes.append(Node((float(np.mean([r for r, _ in c])),), len(members), members))
    return nodes


def _densify(xyz, spacing):
    """Insert points on each chord so consecutive samples are <= ``spacing`` apart."""
    if len(xyz) < 2:
        return xyz
    d = np.diff(xyz, axis=0)
    n = np.maximum(1, np.ceil(np.linalg.norm(d, axis=1) / spacing).astype(int))
    seg = np.repeat(np.arange(len(d)), n)
    frac = (np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n) + 1) / np.repeat(n, n)
    return np.vstack([xyz[:1], xyz[seg] + frac[:, None] * d[seg]])


_OFF = 1 << 20
_NB = np.array([(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1)], dtype=np.int64)


_NB2 = np.array([(a, b, c) for a in range(-3, 4) for b in range(-3, 4) for c in range(-3, 4)], dtype=np.int64)


def _encode(ijk):
    ijk = ijk + _OFF
    return (ijk[:, 0] << 42) | (ijk[:, 1] << 21) | ijk[:, 2]


def _spatial_clusters(ensemble, tol):
    keys, trajs, pts = [], [], []
    for k, tr in enumerate(ensemble):
        xyz = _densify(tr.cartesian(), 0.5 * tol)
        ijk = np.floor(xyz / tol).astype(np.int64)
        keys.append(ijk)
        trajs.append(np.full(len(ijk), k))
        pts.append(xyz)
    ijk = np.vstack(keys)
    owner = np.concatenate(trajs)
    xyz = np.vstack(pts)
    code = _encode(ijk)
    cells, inv = np.unique(code, return_inverse=True)
    cell_ijk = np.zeros((len(cells), 3), dtype=np.int64)
    cell_ijk[inv] = ijk
    sums = np.zeros((len(cells), 3))
    np.add.at(sums, inv, xyz)
    counts = np.bincount(inv, minlength=len(cells))
    # (cell, trajectory) incidences spread over the 27-cell neighbourhood
    nt = len(ensemble)
    pair = np.unique(inv * nt + owner)
    p_cell, p_traj = pair // nt, pair % nt
    spread = []
    for o in _NB:
        nb = _encode(cell_ijk[p_cell] + o)
        j = np.clip(np.searchsorted(cells, nb), 0, len(cells) - 1)
        ok = cells[j] == nb
        spread.append(j[ok] * nt + p_traj[ok])
    sp = np.unique(np.concatenate(spread))
    sp_cell, sp_traj = sp // nt, sp % nt
    cand, support = np.unique(sp_cell, return_counts=True)
    order = np.lexsort((cand, -support))
    suppressed = set()
    nodes = []
    for idx in order:
        if support[idx] < 2:
            break
        ci = int(cand[idx])
        if ci in suppressed:
            continue
        centre = sums[ci] / counts[ci]
        lo, hi = np.searchsorted(sp_cell, ci, "left"), np.searchsorted(sp_cell, ci, "right")
        members = tuple(int(v) for v in sp_traj[lo:hi])
        r = float(np.linalg.norm(centre))
        th = float(np.arccos(np.clip(centre[2] / r, -1.0, 1.0))) if r > 0 else 0.0
        ph = float(np.arctan2(centre[1], centre[0]))
        nodes.append(Node((r, th, ph), len(members), members))
        nb = _encode(cell_ijk[ci] + _NB2)
        j = np.clip(np.searchsorted(cells, nb), 0, len(cells) - 1)
        suppressed.update(j[cells[j] == nb].tolist())
    return nodes


def detect_nodes(ensemble: list, node_tol: float | None = None, mode: str = "radial",
                 r_min_guard: float = 1e-6) -> NodeCatalog:
    """Points shared by several trajectories of one state.

    ``mode="radial"`` clusters turning radii from the event logs (default
    tolerance 1e-6); the origin guard counts as a node at r = 0.
    ``mode="spatial"`` hashes Cartesian samples on a grid of size
    ``node_tol`` (default 0.05) and merges neighbouring shared cells.
    """
    ensemble = list(ensemble)
    if len(ensemble) < 2:
        raise ValueError("node detection needs at least two trajectories")
    states = {tr.state for tr in ensemble if tr.state is not None}
    if len(states) > 1:
        raise ValueError("ensemble mixes different states")
    if mode == "radial":
        tol = 1e-6 if node_tol is None else node_tol
        nodes = [n for n in _radial_clusters(ensemble, tol, r_min_guard) if n.support >= 2]
    elif mode == "spatial":
        tol = 0.05 if node_tol is None else node_tol
        nodes = _spatial_clusters(ensemble, tol)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return NodeCatalog(nodes, mode, tol, len(ensemble))


def hidden_ensemble(n: int, seed: int = 0, scale: tuple = (0.5, 2.0)) -> list:
    """Reproducible hidden-variable draws: |a| in ``scale`` with random sign, b in [-1, 1]."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        a = rng.uniform(*scale, 3) * rng.choice([-1.0, 1.0], 3)
        b = rng.uniform(-1.0, 1.0, 3)
        sg = rng.choice([-1, 1], 3)
        out.append(HiddenVariables(a[0], b[0], a[1], b[1], a[2], b[2], int(sg[0]), int(sg[1]), int(sg[2])))
    return out


class EjectionKind(str, Enum):
    TRAPPED = "Trapped"
    EJECTED = "Ejected"


@dataclass(frozen=True)
class EjectionResult:
    kind: EjectionKind
    time: float | None = None  # time to reach the ejection radius
    trajectory: Trajectory | None = field(default=None, compare=False, repr=False)

    def __str__(self):
        return f"Ejected({self.time:.6g})" if self.kind is EjectionKind.EJECTED else "Trapped"


def classify_ejection(state: BoundState, hidden: HiddenVariables, r0: float, cfg: IntegratorConfig | None = None,
                      theta0: float = 0.5 * math.pi, phi0: float = 0.0) -> EjectionResult:
    """Ejected when r passes ``cfg.ejection_radius``; Trapped after one radial period."""
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    cfg = replace(cfg or IntegratorConfig(), radial_periods=1, t_end=math.inf)
    try:
        tr = integrate_time_trajectory(state, hidden, TrajectoryState(0.0, r0, theta0, phi0), cfg)
    except IntegrationStall as exc:
        raise IndeterminateError(f"cannot classify: {exc}") from exc
    if tr.status == "ejected":
        ev = tr.events_of(EventKind.EJECTION)[-1]
        return EjectionResult(EjectionKind.EJECTED, ev.t, tr)
    return EjectionResult(EjectionKind.TRAPPED, None, tr)
