"""CSV trajectory files with '#' metadata headers.

The column set is fixed: ``t,r,theta,phi,x,y,z,eq46_residual``.  Floats are
written with 17 significant digits so a file read back reproduces the
written values exactly, and identical inputs give byte-identical files.
"""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .basis import BoundState
from .momenta import HiddenVariables
from .quantum_dynamics import Event, EventKind, Trajectory
from .units import UnitMode, UnitSystem

COLUMNS = ("t", "r", "theta", "phi", "x", "y", "z", "eq46_residual")
_FMT = "%.17g"


def _g(v) -> str:
    return repr(float(v))


def cartesian(r, theta, phi) -> np.ndarray:
    r, theta, phi = (np.asarray(v, dtype=float) for v in (r, theta, phi))
    st = np.sin(theta)
    return np.column_stack([r * st * np.cos(phi), r * st * np.sin(phi), r * np.cos(theta)])


@dataclass
class TrajectoryFile:
    """Parsed contents of a trajectory CSV."""

    header: dict
    events: list
    data: np.ndarray  # (n, 8) in file units
    comments: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, COLUMNS.index(name)]

    def event_times(self, kind: str | None = None) -> np.ndarray:
        return np.array([e.t for e in self.events if kind is None or e.kind.value == kind])

    def cartesian_gap(self) -> float:
        """Largest relative mismatch between the (x, y, z) and spherical columns."""
        xyz = cartesian(self.column("r"), self.column("theta"), self.column("phi"))
        got = self.data[:, 4:7]
        scale = np.maximum(np.abs(self.column("r")), np.finfo(float).tiny)
        return float(np.max(np.abs(xyz - got) / scale[:, None])) if len(got) else 0.0


def _header_lines(traj: Trajectory, units: UnitSystem, state: BoundState | None, hidden: HiddenVariables | None,
                  extra: dict | None) -> list:
    lines = ["qhj trajectory file", f"version: {__version__}"]
    if state is not None:
        lines.append(f"state: {state.n},{state.l},{state.m_l}")
        lines.append(f"energy: {_g(state.E * units.energy)} {units.label('energy')}")
    if hidden is not None:
        lines.append("hidden: " + ",".join(_g(v) for v in hidden.as_tuple()))
        lines.append(f"directions: {hidden.sign_r},{hidden.sign_theta},{hidden.sign_phi}")
    lines.append(f"units: {units.mode.value} (length {units.label('length')}, time {units.label('time')})")
    lines.append(f"mode: {traj.mode}")
    lines.append(f"status: {traj.status}")
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
    counts = Counter(e.kind.value for e in traj.events)
    lines.append("event summary: " + (" ".join(f"{k}={counts[k]}" for k in sorted(counts)) or "none"))
    for e in traj.events:
        lines.append("event: " + ",".join([_g(e.t * units.time), e.kind.value, _g(e.r * units.length),
                                           _g(e.theta), _g(e.phi)]))
    return lines


def thin_indices(traj: Trajectory, max_rows: int) -> np.ndarray:
    """Indices of an evenly strided subset that keeps the ends and every event sample."""
    n = len(traj.t)
    if max_rows <= 0 or n <= max_rows:
        return np.arange(n)
    keep = np.zeros(n, dtype=bool)
    keep[:: int(np.ceil(n / max_rows))] = True
    keep[[0, -1]] = True
    if traj.events:
        et = np.array([e.t for e in traj.events])
        keep[np.clip(np.searchsorted(traj.t, et), 0, n - 1)] = True
    return np.nonzero(keep)[0]


def subset(traj: Trajectory, idx) -> Trajectory:
    """Sample subset of ``traj`` (events and metadata shared, no dense record)."""
    extra = {k: np.asarray(v)[idx] for k, v in traj.extra.items() if np.ndim(v) and len(v) == len(traj.t)}
    psi = None if traj.psi is None else traj.psi[idx]
    return Trajectory(traj.t[idx], traj.r[idx], traj.theta[idx], traj.phi[idx], traj.events, traj.signs[idx],
                      traj.velocity[idx], psi, traj.state, traj.hidden, traj.mode, traj.status, traj.meta, extra)


def trajectory_table(traj: Trajectory, residual=None, units: UnitSystem | None = None) -> np.ndarray:
    """(n, 8) array in the file column order and the requested units."""
    units = units or UnitSystem()
    n = len(traj.t)
    res = np.zeros(n) if residual is None else np.asarray(residual, dtype=float)
    r = traj.r * units.length
    xyz = cartesian(r, traj.theta, traj.phi)
    return np.column_stack([traj.t * units.time, r, traj.theta, traj.phi, xyz, res])


def format_trajectory(traj: Trajectory, residual=None, units: UnitSystem | None = None,
                      state: BoundState | None = None, hidden: HiddenVariables | None = None,
                      extra: dict | None = None) -> str:
    units = units or UnitSystem()
    state = state if state is not None else traj.state
    hidden = hidden if hidden is not None else traj.hidden
    buf = io.StringIO()
    for line in _header_lines(traj, units, state, hidden, extra):
        buf.write("# " + line + "\n")
    buf.write(",".join(COLUMNS) + "\n")
    table = trajectory_table(traj, residual, units)
    np.savetxt(buf, table, fmt=_FMT, delimiter=",")
    return buf.getvalue()


def write_trajectory(path, traj: Trajectory, residual=None, units: UnitSystem | None = None,
                     state: BoundState | None = None, hidden: HiddenVariables | None = None,
                     extra: dict | None = None) -> Path:
    """Write ``traj`` as CSV; ``residual`` fills the last column (zeros if omitted)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = format_trajectory(traj, residual, units, state, hidden, extra)
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def read_trajectory(path) -> TrajectoryFile:
    """Parse a file written by :func:`write_trajectory`."""
    header, events, comments = {}, [], []
    rows = []
    columns_seen = False
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                comments.append(body)
                key, sep, value = body.partition(": ")
                if not sep:
                    continue
                if key == "event":
                    t, kind, r, th, ph = value.split(",")
                    events.append(Event(float(t), EventKind(kind), float(r), float(th), float(ph)))
                else:
                    header[key] = value
            elif not columns_seen:
                if tuple(line.split(",")) != COLUMNS:
                    raise ValueError(f"unexpected column line {line!r}")
                columns_seen = True
            elif line:
                rows.append([float(v) for v in line.split(",")])
    if not columns_seen:
        raise ValueError(f"{path}: no column line")
    data = np.array(rows, dtype=float).reshape(-1, len(COLUMNS))
    return TrajectoryFile(header, events, data, comments)


def units_from_header(tf: TrajectoryFile) -> UnitSystem:
    return UnitSystem(UnitMode(tf.header.get("units", "internal").split()[0]))
