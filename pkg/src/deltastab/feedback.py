"""Feedback laws mapping a nodal state to actuator inputs."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolveFailure(RuntimeError):
    pass


class DimensionMismatch(ValueError):
    pass


def factorize(mat):
    """Sparse LU of ``mat`` returned as a solve callable."""
    try:
        return spla.factorized(sp.csc_matrix(mat))
    except RuntimeError as exc:
        raise SolveFailure(str(exc)) from exc


def explicit_feedback(y, lam, B, a_solve, m_mat):
    """u = -lam * B^T A^-1 M y: the elliptic lift of y evaluated at the actuators.

    ``a_solve`` is a prefactored solve with the A matrix.
    """
    y = np.asarray(y, dtype=float)
    if lam == 0 or not np.any(y):
        return np.zeros(B.shape[1])
    w = a_solve(m_mat @ y)
    if not np.all(np.isfinite(w)):
        raise SolveFailure("elliptic solve returned non-finite values")
    return -lam * (B.T @ w)


def riccati_gain(Pi, BM, beta):
    """Dense gain K = -beta^-1 (M^-1 B)^T Pi; ``BM`` is (M^-1 B)^T."""
    BM = np.asarray(BM, dtype=float)
    Pi = np.asarray(Pi, dtype=float)
    if BM.shape[1] != Pi.shape[0]:
        raise DimensionMismatch(f"gain operator has {BM.shape[1]} columns, Pi is {Pi.shape}")
    return -(BM @ Pi) / beta


def riccati_feedback(y, Pi, BM, beta=1.0):
    """u = -beta^-1 (M^-1 B)^T Pi y."""
    y = np.asarray(y, dtype=float)
    if y.shape[0] != np.shape(Pi)[0]:
        raise DimensionMismatch(f"state of size {y.shape[0]} for Pi of size {np.shape(Pi)[0]}")
    return riccati_gain(Pi, BM, beta) @ y


def coarse_to_fine_feedback(y_fine, injection, Pi0, BM0, beta=1.0):
    """Riccati feedback of a coarse mesh applied to the coarse-node values of a fine state."""
    return riccati_feedback(np.asarray(y_fine)[injection], Pi0, BM0, beta)


class ExplicitLaw:
    kind = "explicit"

    def __init__(self, lam, B, a_solve, m_mat):
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        self.lam = lam
        self.B = B
        self.a_solve = a_solve
        self.m_mat = m_mat

    def __call__(self, y):
        return explicit_feedback(y, self.lam, self.B, self.a_solve, self.m_mat)


class GainLaw:
    """u = K y[index] with a dense gain; covers the same-mesh and the
    coarse-to-fine Riccati feedback (``index`` is the node injection)."""

    kind = "riccati"

    def __init__(self, K, index=None, Pi=None):
        self.K = np.asarray(K, dtype=float)
        self.index = index
        self.Pi = Pi

    @classmethod
    def from_riccati(cls, Pi, BM, beta, injection=None):
        return cls(riccati_gain(Pi, BM, beta), injection, Pi)

    def __call__(self, y):
        y = np.asarray(y)
        return self.K @ (y if self.index is None else y[self.index])

    def optimal_cost(self, y0) -> float:
        """0.5 y0^T Pi y0 (restricted to the coarse nodes when transferred)."""
        y0 = np.asarray(y0)
        z = y0 if self.index is None else y0[self.index]
        return 0.5 * float(z @ self.Pi @ z)


class ZeroLaw:
    kind = "none"

    def __init__(self, count):
        self.count = count

    def __call__(self, y):
        return np.zeros(self.count)
