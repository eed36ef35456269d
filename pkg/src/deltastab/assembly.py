"""P1 finite-element matrices for -nu*Lap + 1, the reaction a - 1 and convection b.grad.

Coefficients enter through nodal samples: the reaction matrix is the
symmetrised product of the diagonal of samples with the mass matrix, and
the convection matrix scales the rows of the derivative matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import Triangulation

NEUMANN = "neumann"
DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class CoefficientField:
    """A coefficient ``func(t, x1, x2)`` evaluated on arrays of points.

    Scalar fields return an array shaped like ``x1``; vector fields return a
    pair ``(b1, b2)``.
    """

    func: Callable
    time_dependent: bool = True
    vector: bool = False

    def nodal(self, mesh: Triangulation, t: float) -> np.ndarray:
        x1, x2 = mesh.vertices[:, 0], mesh.vertices[:, 1]
        val = self.func(t, x1, x2)
        if self.vector:
            b1, b2 = val
            return np.stack([np.broadcast_to(np.asarray(b1, float), x1.shape),
                             np.broadcast_to(np.asarray(b2, float), x1.shape)])
        return np.broadcast_to(np.asarray(val, dtype=float), x1.shape).copy()

    def frozen(self, t0: float = 0.0) -> "CoefficientField":
        """Time-independent copy evaluated at ``t0``."""
        f = self.func
        return CoefficientField(lambda t, x1, x2: f(t0, x1, x2), time_dependent=False, vector=self.vector)


def constant_field(value, vector: bool = False) -> CoefficientField:
    if vector:
        v1, v2 = value
        return CoefficientField(lambda t, x1, x2: (np.full_like(x1, v1, dtype=float),
                                                   np.full_like(x1, v2, dtype=float)),
                                time_dependent=False, vector=True)
    return CoefficientField(lambda t, x1, x2: np.full_like(x1, value, dtype=float),
                            time_dependent=False)


def _geometry(mesh: Triangulation):
    """Triangle areas (K,) and hat-function gradients (K, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * det
    # gradient of h_i is the rotated opposite edge divided by 2*area
    opp = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([-opp[..., 1], opp[..., 0]], axis=-1) / det[:, None, None]
    return area, grads


class _Pattern:
    """CSR sparsity pattern of the P1 couplings of a mesh.

    ``slot`` maps each local (triangle, i, j) entry to its position in the
    CSR data array; summation runs through ``np.bincount`` in a fixed order,
    so assembly is bit-reproducible and every matrix shares one pattern.
    """

    def __init__(self, mesh: Triangulation):
        t = mesh.triangles
        n = mesh.num_vertices
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        keys, self.slot = np.unique(rows * n + cols, return_inverse=True)
        self.slot = self.slot.reshape(-1)
        self.rows = keys // n
        self.cols = keys % n
        self.indices = self.cols.astype(np.int32)
        self.indptr = np.searchsorted(self.rows, np.arange(n + 1)).astype(np.int32)
        self.n = n

    def matrix(self, data: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))

    def assemble(self, local: np.ndarray) -> sp.csr_matrix:
        return self.matrix(np.bincount(self.slot, weights=local.ravel(), minlength=self.rows.size))


def _assemble(mesh: Triangulation, local: np.ndarray) -> sp.csr_matrix:
    return _Pattern(mesh).assemble(local)


_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def mass_matrix(mesh: Triangulation) -> sp.csr_matrix:
    area, _ = _geometry(mesh)
    return _assemble(mesh, area[:, None, None] * _MASS_REF[None])


def stiffness_matrix(mesh: Triangulation) -> sp.csr_matrix:
    area, grads = _geometry(mesh)
    local = area[:, None, None] * np.einsum("kid,kjd->kij", grads, grads)
    return _assemble(mesh, local)


def derivative_matrices(mesh: Triangulation) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Matrices D1, D2 with z^T Di y = int (dy/dx_i) z.

    Row index is the test function, column the trial function; the product
    of a hat function with a constant gradient integrates to area/3.
    """
    area, grads = _geometry(mesh)
    out = []
    for d in range(2):
        local = (area / 3.0)[:, None, None] * np.broadcast_to(grads[:, None, :, d], (len(area), 3, 3))
        out.append(_assemble(mesh, local))
    return out[0], out[1]


def dirichlet_nodes(mesh: Triangulation) -> np.ndarray:
    nodes = np.flatnonzero(mesh.boundary)
    if nodes.size == 0:
        raise ValueError("Dirichlet conditions need at least one boundary vertex")
    return nodes


def eliminate(mat: sp.spmatrix, nodes: np.ndarray, diag: float = 1.0) -> sp.csr_matrix:
    """Symmetric elimination: zero the rows and columns of ``nodes`` and put
    ``diag`` on their diagonal."""
    n = mat.shape[0]
    keep = np.ones(n)
    keep[nodes] = 0.0
    K = sp.diags(keep)
    d = np.zeros(n)
    d[nodes] = diag
    return (K @ mat @ K + sp.diags(d)).tocsr()


def a_matrix(mesh: Triangulation, nu: float, bc: str = NEUMANN, *, S=None, M=None) -> sp.csr_matrix:
    """nu*S + M, the matrix of -nu*Lap + 1."""
    S = stiffness_matrix(mesh) if S is None else S
    M = mass_matrix(mesh) if M is None else M
    A = (nu * S + M).tocsr()
    if bc == DIRICHLET:
        A = eliminate(A, dirichlet_nodes(mesh))
    elif bc != NEUMANN:
        raise ValueError(f"unknown boundary condition {bc!r}")
    return A


def reaction_matrix(mesh: Triangulation, a_field: CoefficientField, t: float,
                    mu_ric: float = 0.0, *, M=None) -> sp.csr_matrix:
    """0.5*(D M + M D) with D the diagonal of nodal samples of a - 1 - mu_ric."""
    M = mass_matrix(mesh) if M is None else M
    D = sp.diags(a_field.nodal(mesh, t) - 1.0 - mu_ric)
    return (0.5 * (D @ M + M @ D)).tocsr()


def convection_matrix(mesh: Triangulation, b_field: CoefficientField, t: float,
                      *, D=None) -> sp.csr_matrix:
    D1, D2 = derivative_matrices(mesh) if D is None else D
    b1, b2 = b_field.nodal(mesh, t)
    return (sp.diags(b1) @ D1 + sp.diags(b2) @ D2).tocsr()


def l_matrix(mesh: Triangulation, nu: float, a_field: CoefficientField, b_field: CoefficientField,
             t: float = 0.0, mu_ric: float = 0.0, bc: str = NEUMANN, *, ops=None) -> sp.csr_matrix:
    """Weak-form matrix of nu*Lap - 1 - (a - 1 - mu_ric) - b.grad.

    With Dirichlet conditions the boundary rows and columns are eliminated
    and ``-1`` is placed on their diagonal, which keeps the boundary values
    decaying and decoupled.
    """
    ops = FEOperators.build(mesh) if ops is None else ops
    L = -(nu * ops.S + ops.M) - reaction_matrix(mesh, a_field, t, mu_ric, M=ops.M) \
        - convection_matrix(mesh, b_field, t, D=(ops.D1, ops.D2))
    L = L.tocsr()
    if bc == DIRICHLET:
        L = eliminate(L, dirichlet_nodes(mesh), diag=-1.0)
    return L


class FEOperators:
    """Coefficient-free matrices of one mesh on a shared CSR pattern.

    Because M, S, D1 and D2 share ``pattern``, the coefficient-dependent
    matrices reduce to arithmetic on their data arrays.
    """

    def __init__(self, mesh: Triangulation):
        self.mesh = mesh
        self.pattern = pat = _Pattern(mesh)
        area, grads = _geometry(mesh)
        self.M = pat.assemble(area[:, None, None] * _MASS_REF[None])
        self.S = pat.assemble(area[:, None, None] * np.einsum("kid,kjd->kij", grads, grads))
        D = []
        for d in range(2):
            local = (area / 3.0)[:, None, None] * np.broadcast_to(grads[:, None, :, d], (len(area), 3, 3))
            D.append(pat.assemble(local))
        self.D1, self.D2 = D

    @classmethod
    def build(cls, mesh: Triangulation) -> "FEOperators":
        return cls(mesh)

    def reaction_data(self, d: np.ndarray) -> np.ndarray:
        """Data array of 0.5*(diag(d) M + M diag(d))."""
        pat = self.pattern
        return self.M.data * 0.5 * (d[pat.rows] + d[pat.cols])

    def convection_apply(self, b1: np.ndarray, b2: np.ndarray, y: np.ndarray) -> np.ndarray:
        return b1 * (self.D1 @ y) + b2 * (self.D2 @ y)


def write_coo(mat: sp.spmatrix, path) -> None:
    """Dump a sparse matrix as ``i j value`` lines."""
    coo = sp.coo_matrix(mat)
    with open(path, "w") as fh:
        fh.write(f"# {mat.shape[0]} {mat.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {float(v):.17g}\n")
