"""Placement of point actuators by rescaled copies and their discrete delta vectors."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .mesh import Rect, Triangulation, locate_point


class DegenerateBasePoints(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ActuatorSet:
    d: int
    M: int
    base_points: np.ndarray
    locations: np.ndarray
    sides: tuple

    @property
    def count(self) -> int:
        return self.locations.shape[0]

    def fingerprint(self) -> str:
        import hashlib

        return hashlib.sha256(np.ascontiguousarray(self.locations, dtype=np.float64).tobytes()).hexdigest()[:16]


def _sides(rect, d):
    if isinstance(rect, Rect):
        sides = (rect.l1, rect.l2)
    elif np.isscalar(rect):
        sides = (float(rect),)
    else:
        sides = tuple(float(s) for s in rect)
    if len(sides) != d:
        raise ValueError(f"domain has {len(sides)} sides but d = {d}")
    return sides


def _check_base_points(points: np.ndarray, d: int) -> None:
    if points.shape != (d + 1, d):
        raise DegenerateBasePoints(f"need {d + 1} points in dimension {d}, got shape {points.shape}")
    edges = points[1:] - points[0]
    # simplex volume d! * |det| ; for d = 1 this is just the distance
    vol = abs(np.linalg.det(edges)) / np.prod(np.arange(1, d + 1))
    if vol <= 1e-9:
        raise DegenerateBasePoints("base points are collinear/coplanar (degenerate simplex)")


def default_base_points(d: int, rect=None) -> np.ndarray:
    """d + 1 interior points forming a nondegenerate simplex."""
    if d == 1:
        unit = [[0.3], [0.7]]
    elif d == 2:
        unit = [[0.25, 0.25], [0.75, 0.35], [0.40, 0.75]]
    elif d == 3:
        unit = [[0.25, 0.25, 0.25], [0.75, 0.30, 0.35], [0.35, 0.75, 0.30], [0.40, 0.35, 0.75]]
    else:
        raise ValueError("d must be 1, 2 or 3")
    rect = Rect() if rect is None and d == 2 else rect
    sides = _sides(rect if rect is not None else (1.0,) * d, d)
    return np.array(unit) * np.array(sides)


def place_actuators(rect, d: int, M: int, base_points=None) -> ActuatorSet:
    """Locations of the (d+1) M^d actuators.

    The domain is split into M^d copies scaled by 1/M; copy k (corner
    offset v_k, enumerated with the first coordinate fastest) receives the
    points v_k + x_m / M, so index (d+1)*k + m holds that point.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    sides = _sides(rect, d)
    base = default_base_points(d, rect) if base_points is None else np.asarray(base_points, dtype=float)
    _check_base_points(base, d)
    if np.any(base <= 0) or np.any(base >= np.array(sides)):
        raise ValueError("base points must lie strictly inside the domain")

    # corners computed as exact fractions (i/M) * l_n
    offsets = []
    for idx in itertools.product(range(M), repeat=d):
        idx = idx[::-1]  # first coordinate fastest
        offsets.append([float(Fraction(i, M) * Fraction(s)) for i, s in zip(idx, sides)])
    offsets = np.array(offsets)
    locs = (offsets[:, None, :] + base[None, :, :] / M).reshape(-1, d)
    return ActuatorSet(d, M, base, locs, sides)


def empty_actuators(d: int = 2) -> ActuatorSet:
    return ActuatorSet(d, 0, np.zeros((0, d)), np.zeros((0, d)), (1.0,) * d)


def delta_vector(mesh: Triangulation, x) -> sp.csc_matrix:
    """Sparse (N, 1) vector of barycentric weights of ``x``: pairing it with a
    nodal vector evaluates the P1 function at ``x``."""
    loc = locate_point(mesh, x)
    nodes = mesh.triangles[loc.triangle_index]
    return sp.csc_matrix((loc.weights, (nodes, np.zeros(3, dtype=int))), shape=(mesh.num_vertices, 1))


def b_matrix(mesh: Triangulation, actuators, beta: float | None = None) -> sp.csc_matrix:
    """Delta vectors of all actuators as columns; scaled by beta**-0.5 if given."""
    locs = actuators.locations if isinstance(actuators, ActuatorSet) else np.asarray(actuators, dtype=float)
    cols = [delta_vector(mesh, x) for x in locs]
    if not cols:
        B = sp.csc_matrix((mesh.num_vertices, 0))
    else:
        B = sp.hstack(cols, format="csc")
        B.eliminate_zeros()
    if beta is not None:
        B = B * beta ** -0.5
    return B


def write_actuators(actuators: ActuatorSet, path, header: str | None = None) -> None:
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for x in actuators.locations:
            fh.write(" ".join(repr(float(c)) for c in x) + "\n")


def read_actuators(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, comments="#"))
