"""Shared test utilities."""

import numpy as np
from scipy.spatial import cKDTree

from qhj import HiddenVariables, TrajectoryState
from qhj.quantum_dynamics import zone_roots

HIDDEN = HiddenVariables(1.3, -0.4, 0.7, 0.3, -1.1, 0.5)


def mid_zone(state) -> float:
    r1, r2 = zone_roots(state)
    return 0.5 * (r1 + r2)


def start(state, theta=1.0, phi=0.3) -> TrajectoryState:
    return TrajectoryState(r=mid_zone(state), theta=theta, phi=phi)


def curve_distance(curve: np.ndarray, points: np.ndarray, k: int = 6) -> np.ndarray:
    """Distance from each point to the polyline ``curve`` (rows are vertices).

    The k nearest vertices are looked up in a KD-tree and the distance to
    the segments on either side of each is taken.
    """
    tree = cKDTree(curve)
    _, idx = tree.query(points, k=min(k, len(curve)))
    idx = np.atleast_2d(idx.T).T
    best = np.full(len(points), np.inf)
    for c in range(idx.shape[1]):
        for off in (-1, 0):
            i0 = np.clip(idx[:, c] + off, 0, len(curve) - 2)
            a, b = curve[i0], curve[i0 + 1]
            ab = b - a
            s = np.clip(np.sum((points - a) * ab, 1) / np.maximum(np.sum(ab * ab, 1), 1e-300), 0.0, 1.0)
            best = np.minimum(best, np.linalg.norm(points - (a + s[:, None] * ab), axis=1))
    return best
