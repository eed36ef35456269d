"""Dense Newton-Kleinman solver for the algebraic Riccati equation

    0 = Pi L + L^T Pi - Pi Bb Bb^T Pi + C^T C

with certification of the stabilizing positive semidefinite solution.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as la

log = logging.getLogger(__name__)

LAMBDA_SWEEP = (10.0, 50.0, 100.0, 500.0, 1e3, 5e3, 1e4, 5e4, 1e5, 5e5, 1e6)


class UnstableX(ValueError):
    pass


class NoStabilizingInit(RuntimeError):
    pass


class NewtonDivergence(RuntimeError):
    pass


class CertificateFailure(RuntimeError):
    def __init__(self, check: str, message: str):
        super().__init__(f"{check}: {message}")
        self.check = check


def spectral_abscissa(X: np.ndarray) -> float:
    return float(np.max(la.eigvals(X).real)) if X.size else -np.inf


def lyapunov_solve(X: np.ndarray, Q: np.ndarray, check: bool = True) -> np.ndarray:
    """P with X^T P + P X + Q = 0, X stable (Bartels-Stewart)."""
    X = np.asarray(X, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if check and spectral_abscissa(X) >= 0:
        raise UnstableX("Lyapunov operator is not stable")
    P = la.solve_continuous_lyapunov(X.T, -Q)
    return 0.5 * (P + P.T)


@dataclass
class RiccatiProblem:
    """``L`` is M^-1 [L], ``Bb`` is M^-1 B / sqrt(beta), ``C`` the projection factor."""

    L: np.ndarray
    Bb: np.ndarray
    C: np.ndarray
    beta: float = 1.0
    mu_ric: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.L = np.atleast_2d(np.asarray(self.L, dtype=float))
        n = self.L.shape[0]
        self.Bb = np.asarray(self.Bb, dtype=float).reshape(n, -1)
        self.C = np.asarray(self.C, dtype=float).reshape(-1, n)
        if self.L.shape != (n, n):
            raise ValueError("L must be square")
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def Q(self) -> np.ndarray:
        return self.C.T @ self.C

    def residual(self, Pi: np.ndarray) -> np.ndarray:
        PB = Pi @ self.Bb
        PL = Pi @ self.L
        return PL + PL.T - PB @ PB.T + self.Q

    def relative_residual(self, Pi: np.ndarray) -> float:
        """||R||_F divided by the sum of the Frobenius norms of the four terms."""
        PB = Pi @ self.Bb
        PL = Pi @ self.L
        Q = self.Q
        R = PL + PL.T - PB @ PB.T + Q
        scale = 2 * np.linalg.norm(PL) + np.linalg.norm(PB @ PB.T) + np.linalg.norm(Q)
        return float(np.linalg.norm(R) / scale) if scale > 0 else 0.0

    def closed_loop(self, Pi: np.ndarray) -> np.ndarray:
        return self.L - self.Bb @ (self.Bb.T @ Pi)


@dataclass
class RiccatiSolution:
    Pi: np.ndarray
    residual_norm: float
    closed_loop_abscissa: float
    newton_iterations: int
    residual_history: list = field(default_factory=list)
    seed: str = ""


def explicit_seed_gain(a_mat, m_mat, B, beta: float, lam: float) -> np.ndarray:
    """Gain K0 with Bb K0 = lam M^-1 B B^T A^-1 M, i.e. the explicit feedback
    u = -lam B^T A^-1 M y written against Bb = M^-1 B / sqrt(beta)."""
    A = a_mat.toarray() if hasattr(a_mat, "toarray") else np.asarray(a_mat)
    Md = m_mat.toarray() if hasattr(m_mat, "toarray") else np.asarray(m_mat)
    Bd = B.toarray() if hasattr(B, "toarray") else np.asarray(B)
    W = la.solve(A, Md, assume_a="pos")  # A^-1 M
    return lam * np.sqrt(beta) * (Bd.T @ W)


def partial_stabilizing_gain(problem: RiccatiProblem, margin: float = 1e-2) -> np.ndarray:
    """Gain acting only on the left invariant subspace of the eigenvalues
    with real part above ``-margin``; the rest of the spectrum is untouched."""
    T, Z, k = la.schur(problem.L.T, output="real", sort=lambda re, im: re > -margin)
    if k == 0:
        return np.zeros((problem.Bb.shape[1], problem.n))
    W = Z[:, :k]
    Ared = T[:k, :k].T  # W^T L = Ared W^T
    Bred = W.T @ problem.Bb
    Kred = _small_stabilizing_gain(Ared, Bred)
    return Kred @ W.T


def _small_stabilizing_gain(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Bass gain K = B^T X^-1 with (A + wI) X + X (A + wI)^T = 2 B B^T.

    Then (A - BK) X + X (A - BK)^T = -2w X, so A - BK is stable whenever X is
    positive definite, i.e. whenever (A, B) is controllable.
    """
    shift = max(0.0, -float(np.min(la.eigvals(A).real))) + 1e-3
    As = A + shift * np.eye(A.shape[0])
    X = la.solve_continuous_lyapunov(As, 2.0 * B @ B.T)
    X = 0.5 * (X + X.T)
    try:
        return B.T @ la.solve(X, np.eye(A.shape[0]), assume_a="pos")
    except la.LinAlgError as exc:
        raise NoStabilizingInit("unstable modes are not controllable by the actuators") from exc


def stabilizing_seeds(problem: RiccatiProblem, a_mat=None, m_mat=None, B=None,
                      lambdas: Sequence[float] = LAMBDA_SWEEP):
    """Yield (label, K0) candidates in the order they should be tried."""
    nb = problem.Bb.shape[1]
    yield "zero", np.zeros((nb, problem.n))
    if a_mat is not None:
        W = explicit_seed_gain(a_mat, m_mat, B, problem.beta, 1.0)
        for lam in lambdas:
            yield f"explicit(lambda={lam:g})", lam * W
    yield "partial-schur", partial_stabilizing_gain(problem)


def solve_are(problem: RiccatiProblem, initial_gain: Optional[np.ndarray] = None, *,
              a_mat=None, m_mat=None, B=None, tol: float = 1e-12, maxiter: int = 50,
              residual_tol: float = 1e-8) -> RiccatiSolution:
    """Newton-Kleinman iteration from a stabilizing gain.

    Without ``initial_gain`` the seeds are tried in order: zero gain, the
    explicit feedback for increasing lambda (needs ``a_mat``, ``m_mat``,
    ``B``), and finally a gain from the unstable invariant subspace.
    """
    L, Bb = problem.L, problem.Bb
    Q = problem.Q

    if initial_gain is not None:
        candidates = [("given", np.asarray(initial_gain, dtype=float))]
    else:
        candidates = stabilizing_seeds(problem, a_mat, m_mat, B)
    K = None
    seed = ""
    for label, K0 in candidates:
        if spectral_abscissa(L - Bb @ K0) < 0:
            K, seed = K0, label
            break
        log.debug("seed %s does not stabilize", label)
    if K is None:
        raise NoStabilizingInit("no tried initial gain stabilizes the closed loop")
    log.info("Newton-Kleinman seeded with %s gain", seed)

    history = []
    Pi_old = None
    best = None
    it = 0
    for it in range(1, maxiter + 1):
        Xcl = L - Bb @ K
        Pi = lyapunov_solve(Xcl, Q + K.T @ K, check=False)
        K = Bb.T @ Pi
        res = problem.relative_residual(Pi)
        history.append(res)
        if best is None or res < best[1]:
            best = (Pi, res)
        if Pi_old is not None:
            nrm = np.linalg.norm(Pi)
            change = np.linalg.norm(Pi - Pi_old) / nrm if nrm > 0 else np.linalg.norm(Pi - Pi_old)
            if change <= tol:
                break
            # rounding floor reached: residual no longer improving
            if res <= residual_tol * 1e-3 and len(history) > 2 and history[-1] >= 0.9 * history[-2]:
                break
        elif not np.any(Pi):
            break
        Pi_old = Pi

    Pi, res = best
    if res > residual_tol:
        raise NewtonDivergence(f"residual stalled at {res:.3e} after {it} iterations")
    absc = spectral_abscissa(problem.closed_loop(Pi))
    return RiccatiSolution(Pi, res, absc, it, history, seed)


@dataclass
class Certificate:
    residual: float
    closed_loop_abscissa: float
    min_eigenvalue: float
    residual_ok: bool
    stable_ok: bool
    psd_ok: bool

    @property
    def ok(self) -> bool:
        return self.residual_ok and self.stable_ok and self.psd_ok

    def lines(self) -> list[str]:
        return [
            f"relative_residual {self.residual:.3e} {'ok' if self.residual_ok else 'FAIL'}",
            f"closed_loop_abscissa {self.closed_loop_abscissa:.6g} {'ok' if self.stable_ok else 'FAIL'}",
            f"min_eigenvalue_pi {self.min_eigenvalue:.3e} {'ok' if self.psd_ok else 'FAIL'}",
        ]


def certify(Pi: np.ndarray, problem: RiccatiProblem, residual_tol: float = 1e-8,
            psd_tol: float = 1e-10) -> Certificate:
    res = problem.relative_residual(Pi)
    absc = spectral_abscissa(problem.closed_loop(Pi))
    lam_min = float(la.eigvalsh(0.5 * (Pi + Pi.T))[0])
    scale = np.linalg.norm(Pi, 2)
    return Certificate(res, absc, lam_min, res <= residual_tol, absc < 0,
                       lam_min >= -psd_tol * scale)


def verify_uniqueness_certificate(sol: RiccatiSolution, problem: RiccatiProblem, **kw) -> Certificate:
    """Residual, closed-loop stability and semidefiniteness of ``sol.Pi``.

    Together these identify the unique stabilizing PSD solution; raises
    ``CertificateFailure`` naming the first failed check.
    """
    cert = certify(sol.Pi, problem, **kw)
    if not cert.residual_ok:
        raise CertificateFailure("residual", f"relative residual {cert.residual:.3e}")
    if not cert.stable_ok:
        raise CertificateFailure("stability", f"closed-loop abscissa {cert.closed_loop_abscissa:.3e}")
    if not cert.psd_ok:
        raise CertificateFailure("psd", f"minimum eigenvalue {cert.min_eigenvalue:.3e}")
    return cert


def save_pi(path, Pi: np.ndarray, **meta) -> None:
    """Write Pi with a JSON metadata header: MATLAB ``.mat`` when the path ends
    in ``.mat``, an ``.npz`` archive otherwise."""
    header = json.dumps(meta, sort_keys=True)
    if str(path).endswith(".mat"):
        from scipy.io import savemat

        savemat(path, {"Pi": Pi, "header": header})
        return
    with open(path, "wb") as fh:
        np.savez(fh, Pi=Pi, header=np.array(header))


def load_pi(path) -> tuple[np.ndarray, dict]:
    if str(path).endswith(".mat"):
        from scipy.io import loadmat

        data = loadmat(path)
        return np.asarray(data["Pi"], dtype=float), json.loads(str(np.atleast_1d(data["header"])[0]))
    with np.load(path, allow_pickle=False) as data:
        return data["Pi"], json.loads(str(data["header"]))
