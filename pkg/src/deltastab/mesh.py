"""Triangulations of rectangles: construction, regular refinement, point location."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class PointOutsideDomain(ValueError):
    pass


class NotARefinement(ValueError):
    pass


@dataclass(frozen=True)
class Rect:
    l1: float = 1.0
    l2: float = 1.0

    def __post_init__(self):
        if not (self.l1 > 0 and self.l2 > 0):
            raise ValueError(f"side lengths must be positive, got {self.l1}, {self.l2}")

    @property
    def area(self) -> float:
        return self.l1 * self.l2


@dataclass(frozen=True)
class BarycentricLocation:
    triangle_index: int
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class Triangulation:
    """P1 triangulation.

    ``vertices`` is (N, 2), ``triangles`` is (K, 3) with counterclockwise
    vertex order.  A refined mesh keeps a reference to its parent and the
    ``parent_injection`` array mapping parent vertex ``i`` to the child
    vertex with the same coordinates.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    refinement_level: int = 0
    parent_injection: Optional[np.ndarray] = None
    parent: Optional["Triangulation"] = field(default=None, repr=False)
    rect: Optional[Rect] = None

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary", "parent_injection"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique undirected edges (E, 2) and, per triangle, the edge ids of
        its sides (v0v1, v1v2, v2v0)."""
        t = self.triangles
        all_edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        all_edges.sort(axis=1)
        uniq, inverse = np.unique(all_edges, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        k = t.shape[0]
        tri_edges = np.stack([inverse[:k], inverse[k:2 * k], inverse[2 * k:]], axis=1)
        return uniq, tri_edges

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices, dtype=np.float64).tobytes())
        h.update(np.ascontiguousarray(self.triangles, dtype=np.int64).tobytes())
        return h.hexdigest()[:16]


def build_structured_mesh(rect: Rect, nx: int, ny: int) -> Triangulation:
    """Uniform ``nx`` x ``ny`` grid, every cell cut along its (0,0)-(1,1) diagonal."""
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be >= 1")
    # i/nx * l1 keeps the grid coordinates exact multiples of l1/nx
    xs = np.array([i * rect.l1 / nx for i in range(nx + 1)])
    ys = np.array([j * rect.l2 / ny for j in range(ny + 1)])
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    v00 = (jj * (nx + 1) + ii).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper
    gi, gj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
    boundary = ((gi == 0) | (gi == nx) | (gj == 0) | (gj == ny)).ravel()
    return Triangulation(vertices, triangles, boundary, rect=rect)


def refine(mesh: Triangulation) -> Triangulation:
    """Regular refinement: split every triangle into 4 congruent ones through
    its edge midpoints. Parent vertices keep their indices."""
    n = mesh.num_vertices
    edges, tri_edges = mesh.edges()
    p = mesh.vertices
    midpoints = 0.5 * (p[edges[:, 0]] + p[edges[:, 1]])
    vertices = np.concatenate([p, midpoints])

    # an edge used by a single triangle lies on the boundary
    counts = np.bincount(tri_edges.ravel(), minlength=edges.shape[0])
    boundary = np.concatenate([mesh.boundary, counts == 1])

    a, b, c = mesh.triangles.T
    ab, bc, ca = (tri_edges + n).T
    triangles = np.concatenate([
        np.column_stack([a, ab, ca]),
        np.column_stack([ab, b, bc]),
        np.column_stack([ca, bc, c]),
        np.column_stack([ab, bc, ca]),
    ])
    return Triangulation(
        vertices,
        triangles,
        boundary,
        refinement_level=mesh.refinement_level + 1,
        parent_injection=np.arange(n),
        parent=mesh,
        rect=mesh.rect,
    )


def refine_times(mesh: Triangulation, times: int) -> Triangulation:
    for _ in range(times):
        mesh = refine(mesh)
    return mesh


def barycentric_weights(mesh: Triangulation, p) -> np.ndarray:
    """Barycentric coordinates of point ``p`` with respect to every triangle, (K, 3)."""
    p = np.asarray(p, dtype=float)
    tri = mesh.vertices[mesh.triangles]
    x0, x1, x2 = tri[:, 0], tri[:, 1], tri[:, 2]
    det = (x1[:, 0] - x0[:, 0]) * (x2[:, 1] - x0[:, 1]) - (x2[:, 0] - x0[:, 0]) * (x1[:, 1] - x0[:, 1])
    w1 = ((p[0] - x0[:, 0]) * (x2[:, 1] - x0[:, 1]) - (x2[:, 0] - x0[:, 0]) * (p[1] - x0[:, 1])) / det
    w2 = ((x1[:, 0] - x0[:, 0]) * (p[1] - x0[:, 1]) - (p[0] - x0[:, 0]) * (x1[:, 1] - x0[:, 1])) / det
    return np.column_stack([1.0 - w1 - w2, w1, w2])


def locate_point(mesh: Triangulation, p, tol: float = 1e-10) -> BarycentricLocation:
    p = np.array(p, dtype=float)
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    if np.any(p < lo - tol) or np.any(p > hi + tol):
        raise PointOutsideDomain(f"point {tuple(p)} outside the domain")
    p = np.clip(p, lo, hi)

    w = barycentric_weights(mesh, p)
    worst = w.min(axis=1)
    k = int(np.argmax(worst))
    if worst[k] < -tol:
        raise PointOutsideDomain(f"point {tuple(p)} is not covered by any triangle")
    weights = np.clip(w[k], 0.0, 1.0)
    weights /= weights.sum()
    return BarycentricLocation(k, weights)


def interpolate(mesh: Triangulation, values, p) -> float:
    """Evaluate the P1 function with nodal ``values`` at ``p``."""
    loc = locate_point(mesh, p)
    return float(loc.weights @ np.asarray(values)[mesh.triangles[loc.triangle_index]])


def _same_mesh(a: Triangulation, b: Triangulation) -> bool:
    if a is b:
        return True
    return (a.vertices.shape == b.vertices.shape and a.triangles.shape == b.triangles.shape
            and np.array_equal(a.vertices, b.vertices) and np.array_equal(a.triangles, b.triangles))


def coarse_node_injection(coarse: Triangulation, fine: Triangulation) -> np.ndarray:
    """Indices in ``fine`` of the vertices of ``coarse``."""
    maps = []
    m = fine
    while not _same_mesh(m, coarse):
        if m.parent is None or m.parent_injection is None:
            raise NotARefinement("fine mesh is not a refinement of the coarse mesh")
        maps.append(m.parent_injection)
        m = m.parent
    index = np.arange(coarse.num_vertices)
    for inj in reversed(maps):
        index = inj[index]
    return index


def format_mesh(mesh: Triangulation) -> str:
    lines = [f"vertices {mesh.num_vertices} triangles {mesh.num_triangles}"]
    lines += [f"{x!r} {y!r} {int(b)}" for (x, y), b in zip(mesh.vertices.tolist(), mesh.boundary)]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    return "\n".join(lines) + "\n"


def write_mesh(mesh: Triangulation, path, header: str | None = None) -> None:
    with open(path, "w") as fh:
        if header:
            fh.write("".join(f"# {line}\n" for line in header.splitlines()))
        fh.write(format_mesh(mesh))


def read_mesh(path) -> Triangulation:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    head = lines[0].split()
    if len(head) != 4 or head[0] != "vertices" or head[2] != "triangles":
        raise ValueError(f"{path}: bad mesh header {lines[0]!r}")
    n, k = int(head[1]), int(head[3])
    if len(lines) < 1 + n + k:
        raise ValueError(f"{path}: expected {n} vertices and {k} triangles")
    vrows = [ln.split() for ln in lines[1:1 + n]]
    vertices = np.array([[float(r[0]), float(r[1])] for r in vrows])
    boundary = np.array([bool(int(r[2])) for r in vrows])
    triangles = np.array([[int(v) for v in ln.split()] for ln in lines[1 + n:1 + n + k]], dtype=np.int64)
    mesh = Triangulation(vertices, triangles, boundary)
    if np.any(mesh.signed_areas() <= 0):
        raise ValueError(f"{path}: triangles must be counterclockwise with positive area")
    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    rect = Rect(*(hi - lo)) if np.allclose(lo, 0.0) else None
    return Triangulation(vertices, triangles, boundary, rect=rect)
