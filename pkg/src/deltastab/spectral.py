"""Generalized eigenpairs of (A, M), the spectral projection factor and the gap constant."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# above this size the eigenpairs come from shift-invert Lanczos
DENSE_LIMIT = 1500


class EigenFailure(RuntimeError):
    pass


class ConstraintRankDeficient(ValueError):
    pass


class MeshResolutionWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class EigenBasis:
    eigenvalues: np.ndarray
    vectors: np.ndarray
    theta_factor: np.ndarray

    @property
    def count(self) -> int:
        return self.eigenvalues.size


def _dense(mat) -> np.ndarray:
    return mat.toarray() if sp.issparse(mat) else np.asarray(mat, dtype=float)


def leading_eigenpairs(a_mat, m_mat, count: int) -> EigenBasis:
    """Smallest ``count`` eigenpairs of A v = alpha M v, M-orthonormal."""
    n = a_mat.shape[0]
    if not 1 <= count <= n:
        raise ValueError(f"need 1 <= count <= {n}, got {count}")
    if n <= DENSE_LIMIT or count > n // 3:
        vals, vecs = la.eigh(_dense(a_mat), _dense(m_mat), subset_by_index=[0, count - 1])
    else:
        try:
            vals, vecs = spla.eigsh(sp.csc_matrix(a_mat), k=count, M=sp.csc_matrix(m_mat), sigma=0.0,
                                    which="LM", v0=np.ones(n), tol=1e-13)
        except spla.ArpackError as exc:
            raise EigenFailure(str(exc)) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    # fix the sign so that results are reproducible
    signs = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(count)])
    vecs = vecs * signs
    gram = vecs.T @ (m_mat @ vecs)
    theta = la.inv(0.5 * (gram + gram.T))
    theta_c = la.cholesky(0.5 * (theta + theta.T), lower=False)
    resid = np.linalg.norm(a_mat @ vecs - (m_mat @ vecs) * vals, axis=0)
    scale = np.linalg.norm(a_mat @ vecs, axis=0)
    if np.any(resid > 1e-8 * np.maximum(scale, 1e-300)):
        raise EigenFailure(f"eigenpair residual {resid.max():.2e} above tolerance")
    return EigenBasis(vals, vecs, theta_c)


def projection_factor(basis: EigenBasis, m_mat) -> np.ndarray:
    """Theta_c c^T M, so that y^T (C^T C) y is the squared L2 norm of the
    orthogonal projection of y onto the span of the eigenvectors."""
    return basis.theta_factor @ np.asarray((m_mat @ basis.vectors).T)


def constrained_rayleigh_min(a_mat, m_mat, B) -> float:
    """Minimum of z^T A M^-1 A z / z^T A z over nodal vectors with B^T z = 0.

    The constraint space is parametrised by an orthonormal null-space basis
    of B^T and the reduced pencil is solved densely.
    """
    A = _dense(a_mat)
    Mlu = la.cho_factor(_dense(m_mat))
    n = A.shape[0]
    Bd = _dense(B).reshape(n, -1)
    if Bd.shape[1]:
        if np.linalg.matrix_rank(Bd) < Bd.shape[1]:
            raise ConstraintRankDeficient("actuator columns are linearly dependent on this mesh")
        Z = la.null_space(Bd.T)
    else:
        Z = np.eye(n)
    AZ = A @ Z
    num = AZ.T @ la.cho_solve(Mlu, AZ)
    den = Z.T @ AZ
    xi = la.eigh(0.5 * (num + num.T), 0.5 * (den + den.T), eigvals_only=True, subset_by_index=[0, 0])[0]
    return float(xi)


def gap_constant(mesh, a_mat, m_mat, actuators) -> float:
    """Discrete gap constant for the given actuators on ``mesh``.

    Warns with ``MeshResolutionWarning`` when the mesh has few vertices per
    point constraint.
    """
    from .actuators import b_matrix

    B = b_matrix(mesh, actuators)
    xi = constrained_rayleigh_min(a_mat, m_mat, B)
    count = B.shape[1]
    if count and mesh.num_vertices < 25 * count:
        warnings.warn(f"mesh with {mesh.num_vertices} vertices under-resolves {count} point constraints; "
                      f"xi = {xi:.4g} is a coarse estimate", MeshResolutionWarning, stacklevel=2)
    return xi
