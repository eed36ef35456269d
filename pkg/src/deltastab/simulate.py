"""Closed-loop time integration and diagnostics.

Crank-Nicolson for the symmetric part nu*S + M + R(t) (R the reaction
matrix of a - 1, no shift), second-order Adams-Bashforth for convection
and actuator forcing.  The Riccati shift mu_ric only enters the Riccati
problem and the weights of the truncated cost.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .actuators import ActuatorSet, b_matrix
from .assembly import (DIRICHLET, NEUMANN, CoefficientField, FEOperators, a_matrix, convection_matrix,
                       dirichlet_nodes, eliminate, l_matrix)
from .feedback import ExplicitLaw, GainLaw, ZeroLaw, factorize
from .mesh import Triangulation, coarse_node_injection
from .riccati import RiccatiProblem, RiccatiSolution, solve_are
from .spectral import leading_eigenpairs, projection_factor

log = logging.getLogger(__name__)

CG_RTOL = 1e-13
CG_MAXITER = 25


class NonFiniteState(FloatingPointError):
    pass


class NonPositiveNorm(ValueError):
    pass


class Plant:
    """Assembled operators of one controlled equation on one mesh."""

    def __init__(self, mesh: Triangulation, nu: float, a_field: CoefficientField,
                 b_field: CoefficientField, actuators: ActuatorSet, bc: str = NEUMANN):
        if nu <= 0:
            raise ValueError("nu must be positive")
        self.mesh = mesh
        self.nu = nu
        self.a_field = a_field
        self.b_field = b_field
        self.actuators = actuators
        self.bc = bc
        self.ops = FEOperators.build(mesh)
        self.M = self.ops.M
        self.A = a_matrix(mesh, nu, bc, S=self.ops.S, M=self.ops.M)
        self.a_solve = factorize(self.A)
        self.m_solve = factorize(self.M)
        self.B = b_matrix(mesh, actuators)
        self._fixed = dirichlet_nodes(mesh) if bc == DIRICHLET else None
        self._basis = {}

    @property
    def n(self) -> int:
        return self.mesh.num_vertices

    @property
    def autonomous(self) -> bool:
        return not (self.a_field.time_dependent or self.b_field.time_dependent)

    def symmetric_part(self, t: float) -> sp.csr_matrix:
        """nu*S + M + reaction matrix of a(t) - 1, no shift."""
        return self.ops.pattern.matrix(self.symmetric_data(t))

    def symmetric_data(self, t: float) -> np.ndarray:
        ops = self.ops
        return self.nu * ops.S.data + ops.M.data + ops.reaction_data(self.a_field.nodal(self.mesh, t) - 1.0)

    def convection_apply(self, t: float, y: np.ndarray) -> np.ndarray:
        b1, b2 = self.b_field.nodal(self.mesh, t)
        return self.ops.convection_apply(b1, b2, y)

    def convection(self, t: float) -> sp.csr_matrix:
        return convection_matrix(self.mesh, self.b_field, t, D=(self.ops.D1, self.ops.D2))

    def l_matrix(self, t: float = 0.0, mu_ric: float = 0.0) -> sp.csr_matrix:
        return l_matrix(self.mesh, self.nu, self.a_field, self.b_field, t, mu_ric, self.bc, ops=self.ops)

    def basis(self, count: int):
        if count not in self._basis:
            self._basis[count] = leading_eigenpairs(self.A, self.M, count)
        return self._basis[count]

    def projection(self, count: int) -> np.ndarray:
        """Projection factor onto the first ``count`` eigenfunctions (0 rows if count == 0)."""
        if count == 0:
            return np.zeros((0, self.n))
        return projection_factor(self.basis(count), self.M)

    def gain_operator(self) -> np.ndarray:
        """(M^-1 B)^T as a dense (M0, N) array."""
        return np.asarray(self.m_solve_dense(self.B.toarray())).T

    def m_solve_dense(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return self.m_solve(X)
        return np.column_stack([self.m_solve(X[:, j]) for j in range(X.shape[1])]) if X.shape[1] else X.copy()

    def nodal(self, field_or_values) -> np.ndarray:
        if callable(field_or_values):
            x1, x2 = self.mesh.vertices.T
            return np.broadcast_to(np.asarray(field_or_values(x1, x2), dtype=float), x1.shape).copy()
        y = np.asarray(field_or_values, dtype=float)
        if y.shape != (self.n,):
            raise ValueError(f"nodal vector of size {y.shape} for {self.n} vertices")
        return y.copy()

    def riccati_problem(self, mu_ric: float = 1.0, beta: float = 1.0, M1: int = 30) -> RiccatiProblem:
        """Frozen (t = 0) Riccati data: L = M^-1 [L^mu](0), Bb = M^-1 B / sqrt(beta)."""
        Ld = self.l_matrix(0.0, mu_ric).toarray()
        Lbar = self.m_solve_dense(Ld)
        Bb = self.m_solve_dense(self.B.toarray()) / np.sqrt(beta)
        C = self.projection(M1)
        meta = {"mesh": self.mesh.fingerprint(), "actuators": self.actuators.fingerprint(),
                "mu_ric": mu_ric, "beta": beta, "M1": M1, "N": self.n}
        return RiccatiProblem(Lbar, Bb, C, beta=beta, mu_ric=mu_ric, meta=meta)

    def solve_riccati(self, mu_ric: float = 1.0, beta: float = 1.0, M1: int = 30) -> tuple[RiccatiProblem, RiccatiSolution]:
        prob = self.riccati_problem(mu_ric, beta, M1)
        sol = solve_are(prob, a_mat=self.A, m_mat=self.M, B=self.B)
        return prob, sol

    # feedback constructors ------------------------------------------------

    def explicit_law(self, lam: float) -> ExplicitLaw:
        return ExplicitLaw(lam, self.B, self.a_solve, self.M)

    def riccati_law(self, Pi: np.ndarray, beta: float = 1.0, coarse: Optional["Plant"] = None) -> GainLaw:
        """Riccati feedback; with ``coarse`` the gain is that of the coarse plant
        applied to the coarse-node values of this plant's state."""
        if coarse is None:
            return GainLaw.from_riccati(Pi, self.gain_operator(), beta)
        inj = coarse_node_injection(coarse.mesh, self.mesh)
        return GainLaw.from_riccati(Pi, coarse.gain_operator(), beta, injection=inj)

    def zero_law(self) -> ZeroLaw:
        return ZeroLaw(self.B.shape[1])


def vprime_norm(y, a_solve, m_mat) -> float:
    """sqrt(y^T M A^-1 M y)."""
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        return 0.0
    My = m_mat @ y
    val = float(My @ a_solve(My))
    return float(np.sqrt(max(val, 0.0)))


@dataclass
class SimConfig:
    plant: Plant
    y0: Union[Callable, np.ndarray]
    dt: float = 1e-3
    T: float = 5.0
    feedback: Optional[Callable] = None
    mu_ric: float = 0.0
    beta: float = 1.0
    M1: int = 30
    record_every: int = 1
    snapshot_times: tuple = ()

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.T < self.dt:
            raise ValueError("T must be at least one time step")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.feedback is None:
            self.feedback = self.plant.zero_law()

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class TimeSeries:
    t: list = field(default_factory=list)
    vprime: list = field(default_factory=list)
    linf: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    cost: list = field(default_factory=list)
    u: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    truncated: bool = False

    def append(self, t, vp, linf, l2, cost, u):
        self.t.append(t)
        self.vprime.append(vp)
        self.linf.append(linf)
        self.l2.append(l2)
        self.cost.append(cost)
        self.u.append(np.array(u, dtype=float))

    def arrays(self):
        return {"t": np.array(self.t), "vprime_norm": np.array(self.vprime), "linf_norm": np.array(self.linf),
                "l2_norm": np.array(self.l2), "cost_running": np.array(self.cost),
                "u": np.array(self.u).reshape(len(self.t), -1)}


@dataclass
class CostReport:
    truncated_cost: float
    optimal_cost_estimate: Optional[float] = None


class IMEXStepper:
    """Crank-Nicolson / AB2 stepper; caches f^{n-1} and the factorized system."""

    def __init__(self, plant: Plant, feedback: Callable, dt: float):
        self.plant = plant
        self.feedback = feedback
        self.dt = dt
        self.f_prev = None
        self._K = {}
        self._lhs = None
        self._lhs_key = ()

    def _key(self, t):
        return round(t, 10) if self.plant.a_field.time_dependent else None

    def _sym(self, t):
        key = self._key(t)
        if key not in self._K:
            if key is not None:
                self._K = {k: v for k, v in self._K.items() if k is not None and k >= key - 2 * self.dt}
            self._K[key] = self.plant.symmetric_data(t)
        return self._K[key]

    def _solve(self, t_next, rhs):
        p = self.plant
        if p._fixed is not None:
            rhs = rhs.copy()
            rhs[p._fixed] = 0.0
        key = self._key(t_next)
        if self._lhs is None:
            self._lhs = factorize(self._lhs_matrix(t_next))
            self._lhs_key = key
        if key == self._lhs_key:
            return self._lhs(rhs)
        # the time-dependent part is small against M/dt: CG preconditioned
        # with the factorization of an earlier step converges in a few sweeps
        lhs = self._lhs_matrix(t_next)
        prec = spla.LinearOperator(lhs.shape, matvec=self._lhs, dtype=float)
        x, info = spla.cg(lhs, rhs, x0=self._lhs(rhs), M=prec, rtol=CG_RTOL, atol=0.0, maxiter=CG_MAXITER)
        if info != 0:
            self._lhs = factorize(lhs)
            self._lhs_key = key
            x = self._lhs(rhs)
        return x

    def _lhs_matrix(self, t):
        p = self.plant
        lhs = p.ops.pattern.matrix(p.M.data / self.dt + 0.5 * self._sym(t))
        if p._fixed is not None:
            lhs = eliminate(lhs, p._fixed)
        return lhs

    def forcing(self, t, y):
        u = self.feedback(y)
        f = -self.plant.convection_apply(t, y)
        if u.size:
            f = f + self.plant.B @ u
        return f, u

    def step(self, t, y):
        """Advance from (t, y); returns (y_next, u(y))."""
        f, u = self.forcing(t, y)
        f_prev = f if self.f_prev is None else self.f_prev
        p = self.plant
        K = p.ops.pattern.matrix(self._sym(t))
        rhs = p.M @ y / self.dt - 0.5 * (K @ y) + 1.5 * f - 0.5 * f_prev
        y_next = self._solve(t + self.dt, rhs)
        if not np.all(np.isfinite(y_next)):
            raise NonFiniteState(f"non-finite state after t = {t:.6g}")
        self.f_prev = f
        return y_next, u


def step_imex(state, t, plant: Plant, feedback: Callable, dt: float, first: bool = False):
    """One IMEX step from (y^n, y^{n-1}) at time t to y^{n+1}.

    With ``first`` the explicit terms use forward Euler (f^{n-1} := f^n).
    """
    y, y_prev = state
    stepper = IMEXStepper(plant, feedback, dt)
    if not first:
        stepper.f_prev, _ = stepper.forcing(t - dt, np.asarray(y_prev, dtype=float))
    y_next, _ = stepper.step(t, np.asarray(y, dtype=float))
    return y_next


def run_simulation(config: SimConfig) -> tuple[TimeSeries, CostReport]:
    """Integrate from 0 to T, recording norms every ``record_every`` steps.

    The truncated cost 0.5 int e^{2 mu t} (|C y|^2 + beta |u|^2) dt is
    accumulated with the trapezoidal rule over every step.  A non-finite
    state truncates the run and sets ``series.truncated``.
    """
    p = config.plant
    law = config.feedback
    C = p.projection(config.M1)
    y = p.nodal(config.y0)
    dt, mu, beta = config.dt, config.mu_ric, config.beta
    steps = config.steps
    snap_steps = {int(round(ts / dt)) for ts in config.snapshot_times}

    stepper = IMEXStepper(p, law, dt)
    series = TimeSeries()

    def integrand(t, y, u):
        Cy = C @ y
        return np.exp(2 * mu * t) * (float(Cy @ Cy) + beta * float(u @ u))

    def record(t, y, u, cost):
        series.append(t, vprime_norm(y, p.a_solve, p.M), float(np.max(np.abs(y))),
                      float(np.sqrt(max(y @ (p.M @ y), 0.0))), cost, u)

    cost = 0.0
    u = law(y)
    g = integrand(0.0, y, u)
    record(0.0, y, u, cost)
    if 0 in snap_steps:
        series.snapshots.append((0.0, y.copy()))
    for n in range(steps):
        t = n * dt
        try:
            y, _ = stepper.step(t, y)
        except NonFiniteState as exc:
            log.warning("%s; run truncated", exc)
            series.truncated = True
            break
        t_next = (n + 1) * dt
        u = law(y)
        g_next = integrand(t_next, y, u)
        cost += 0.25 * dt * (g + g_next)
        g = g_next
        if (n + 1) % config.record_every == 0 or n + 1 == steps:
            record(t_next, y, u, cost)
        if n + 1 in snap_steps:
            series.snapshots.append((t_next, y.copy()))

    y0 = p.nodal(config.y0)
    opt = law.optimal_cost(y0) if isinstance(law, GainLaw) and law.Pi is not None else None
    return series, CostReport(cost, opt)


def decay_rate_fit(series, window) -> float:
    """Least-squares slope of log ||y||_{V'} against t on ``window``."""
    if isinstance(series, TimeSeries):
        t, v = np.array(series.t), np.array(series.vprime)
    else:
        t, v = map(np.asarray, series)
    ta, tb = window
    sel = (t >= ta - 1e-12) & (t <= tb + 1e-12)
    if sel.sum() < 2:
        raise ValueError("fewer than two samples in the window")
    if np.any(v[sel] <= 0):
        raise NonPositiveNorm("norm vanishes inside the fit window")
    slope, _ = np.polyfit(t[sel], np.log(v[sel]), 1)
    return float(slope)
