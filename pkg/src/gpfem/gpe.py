"""Discrete Gross-Pitaevskii ground states by Sobolev gradient flow.

The flow uses the energy-adaptive metric ``<A(u_n) v, w>``.  One step solves
``A(u_n) z = M u_n`` and moves to ``(1 - tau) u_n + tau z / (u_n^T M z)``
followed by renormalization; with ``tau = 1`` this is generalized inverse
iteration, which decreases the energy monotonically.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import assembly
from .elements import DiscreteField, FeSpace, quad_values, integrate
from .interp import bubble, interpolate
from .linalg import Solver, SpdSolver

log = logging.getLogger(__name__)


class InitialGuess(str, enum.Enum):
    BUBBLE = "BUBBLE"
    GIVEN = "GIVEN"


@dataclass(frozen=True)
class FlowConfig:
    step: float = 1.0
    tol: float = 1e-12
    max_iter: int = 2000
    initial: InitialGuess = InitialGuess.BUBBLE
    solver: SpdSolver = SpdSolver()

    def __post_init__(self):
        if not 0.0 < self.step <= 1.0:
            raise ValueError("step must lie in (0, 1]")
        if self.tol <= 0.0:
            raise ValueError("tolerance must be positive")


@dataclass(eq=False)
class GpeProblem:
    space: FeSpace
    potential: assembly.Potential
    beta: float

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        return assembly.assemble_stiffness(self.space)

    @cached_property
    def mass(self) -> sp.csr_matrix:
        return assembly.assemble_mass(self.space)

    @cached_property
    def potential_matrix(self) -> sp.csr_matrix:
        return assembly.assemble_potential(self.space, self.potential)

    @cached_property
    def linear_part(self) -> sp.csr_matrix:
        """``K + A_V`` on the shared pattern."""
        K = self.stiffness
        return _same_pattern(K, K.data + self.potential_matrix.data)

    @cached_property
    def ones_integral(self) -> np.ndarray:
        return assembly.load_vector(self.space)

    def operator(self, v: DiscreteField) -> sp.csr_matrix:
        """``A_v = K + A_V + beta A_rho(v)``."""
        L = self.linear_part
        if self.beta == 0.0:
            return L
        R = assembly.assemble_density(self.space, v)
        return _same_pattern(L, L.data + self.beta * R.data)

    def field(self, coeffs) -> DiscreteField:
        return DiscreteField(self.space, np.asarray(coeffs, dtype=float))


def _same_pattern(A: sp.csr_matrix, data: np.ndarray) -> sp.csr_matrix:
    return sp.csr_matrix((data, A.indices, A.indptr), shape=A.shape)


@dataclass
class GroundState:
    u: DiscreteField
    energy: float
    eigenvalue: float
    iterations: int
    residual: float
    history: list = field(default_factory=list, repr=False)


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, history: list):
        super().__init__(message)
        self.history = history


def quartic_integral(space: FeSpace, v: np.ndarray) -> float:
    return integrate(space, quad_values(space, v) ** 4)


def energy(problem: GpeProblem, v: DiscreteField) -> float:
    c = v.coeffs
    e = 0.5 * (c @ (problem.linear_part @ c))
    if problem.beta:
        e += 0.25 * problem.beta * quartic_integral(problem.space, c)
    return float(e)


def eigenvalue(problem: GpeProblem, v: DiscreteField) -> float:
    c = v.coeffs
    m = c @ (problem.mass @ c)
    if m <= 0:
        raise ValueError("eigenvalue of a zero field is undefined")
    return float(c @ (problem.operator(v) @ c) / m)


def mass_norm2(space_or_problem, v: DiscreteField) -> float:
    M = (
        space_or_problem.mass
        if isinstance(space_or_problem, GpeProblem)
        else assembly.assemble_mass(space_or_problem)
    )
    return float(v.coeffs @ (M @ v.coeffs))


def normalize(space_or_problem, v: DiscreteField) -> DiscreteField:
    """Scale ``v`` to unit L2 norm.  Accepts a space or a problem (cached mass)."""
    m = mass_norm2(space_or_problem, v)
    if not m > 0:
        raise ValueError("cannot normalize a zero field")
    return DiscreteField(v.space, v.coeffs / np.sqrt(m))


@dataclass
class FlowStep:
    u: DiscreteField
    eigenvalue: float
    residual: float


class _SolverSlot:
    """Keeps one solver alive across steps so its symbolic analysis is reused."""

    def __init__(self, cfg: SpdSolver):
        self.cfg = cfg
        self.solver: Solver | None = None

    def bind(self, A) -> Solver:
        if self.solver is None:
            self.solver = Solver(A, self.cfg)
        else:
            self.solver.update(A)
        return self.solver


def flow_step(
    problem: GpeProblem,
    u: DiscreteField,
    cfg: FlowConfig = FlowConfig(),
    slot: _SolverSlot | None = None,
) -> FlowStep:
    """One Sobolev gradient step from a normalized ``u``.

    Returns the next iterate, the eigenvalue of ``u`` and the residual of ``u``
    measured in the dual norm of ``A(u)``.
    """
    A = problem.operator(u)
    solver = (slot or _SolverSlot(cfg.solver)).bind(A)
    Mu = problem.mass @ u.coeffs
    z = solver(Mu)
    Au = A @ u.coeffs
    lam = float(u.coeffs @ Au)
    r = Au - lam * Mu
    # A^{-1} r = u - lam * z
    res2 = float(r @ (u.coeffs - lam * z))
    residual = float(np.sqrt(max(res2, 0.0)))
    new = (1.0 - cfg.step) * u.coeffs + (cfg.step / float(Mu @ z)) * z
    return FlowStep(normalize(problem, problem.field(new)), lam, residual)


def initial_guess(problem: GpeProblem) -> DiscreteField:
    v = interpolate(problem.space, bubble(problem.space.mesh.domain))
    return normalize(problem, v)


def fix_sign(problem: GpeProblem, v: DiscreteField) -> DiscreteField:
    return -v if problem.ones_integral @ v.coeffs < 0 else v


def solve_ground_state(
    problem: GpeProblem, cfg: FlowConfig = FlowConfig(), u0: DiscreteField | None = None
) -> GroundState:
    """Iterate the flow until the residual drops below ``cfg.tol``.

    ``history`` collects ``(energy, eigenvalue, residual)`` of every iterate
    that was tested.
    """
    if cfg.initial is InitialGuess.GIVEN:
        if u0 is None:
            raise ValueError("initial guess GIVEN requires u0")
        u = normalize(problem, u0)
    else:
        u = initial_guess(problem)
    history = []
    slot = _SolverSlot(cfg.solver)
    for it in range(cfg.max_iter + 1):
        step = flow_step(problem, u, cfg, slot)
        history.append((energy(problem, u), step.eigenvalue, step.residual))
        log.debug("iter %d  E=%.12f  lambda=%.12f  res=%.3e", it, *history[-1])
        if step.residual < cfg.tol:
            u = fix_sign(problem, u)
            return GroundState(
                u, history[-1][0], step.eigenvalue, it, step.residual, history
            )
        if it == cfg.max_iter:
            break
        u = step.u
    raise NonConvergenceError(
        f"flow did not reach residual {cfg.tol:g} in {cfg.max_iter} iterations "
        f"(last {history[-1][2]:.3e})",
        history,
    )
