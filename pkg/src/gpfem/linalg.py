"""SPD sparse solves: sparse Cholesky or preconditioned conjugate gradients."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

try:  # optional CHOLMOD backend
    from sksparse.cholmod import CholmodNotPositiveDefiniteError, analyze as _cholmod
except ImportError:  # pragma: no cover - depends on the environment
    _cholmod = None

HAVE_CHOLMOD = _cholmod is not None

DIRECT_LIMIT = 300_000


class SolverError(RuntimeError):
    """Iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class Strategy(str, enum.Enum):
    DIRECT_CHOLESKY = "DIRECT_CHOLESKY"
    PCG_JACOBI = "PCG_JACOBI"
    PCG_AMG = "PCG_AMG"


@dataclass(frozen=True)
class SpdSolver:
    strategy: Strategy | None = None  # None: choose by size
    tol: float = 1e-13
    max_iter: int = 20_000
    debug: bool = False

    def resolve(self, n: int) -> Strategy:
        if self.strategy is not None:
            return Strategy(self.strategy)
        if n <= DIRECT_LIMIT or HAVE_CHOLMOD:
            return Strategy.DIRECT_CHOLESKY
        return Strategy.PCG_AMG


class Factorization:
    """Sparse Cholesky factor of an SPD matrix, reusable for many right-hand sides."""

    def __init__(self, A: sp.spmatrix):
        A = sp.csc_matrix(A)
        # supernodal mode always computes LL^T, so indefinite input raises
        self._symbolic = _cholmod(A, mode="supernodal") if HAVE_CHOLMOD else None
        self.refactor(A)

    def refactor(self, A: sp.spmatrix):
        """Numeric factorization of a matrix with the same pattern."""
        A = sp.csc_matrix(A)
        self.A = A
        if self._symbolic is not None:
            try:
                self._symbolic.cholesky_inplace(A)
            except CholmodNotPositiveDefiniteError as exc:
                raise NotPositiveDefiniteError(str(exc)) from None
            self._solve = self._symbolic.solve_A
        else:
            lu = spla.splu(
                A,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options=dict(SymmetricMode=True),
            )
            d = lu.U.diagonal()
            if not np.all(lu.perm_r == lu.perm_c) or np.any(d <= 0):
                raise NotPositiveDefiniteError("matrix is not positive definite")
            self._solve = lu.solve

    def __call__(self, b: np.ndarray) -> np.ndarray:
        return self._solve(b)


def pcg(A, b, apply_prec, tol=1e-13, max_iter=20_000, x0=None, debug=False):
    """Preconditioned CG; returns ``(x, iterations)``.

    With ``debug`` the A-norm of the error is tracked against a direct solve and
    must decrease monotonically.
    """
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    r = b - A @ x
    z = apply_prec(r)
    p = z.copy()
    rz = r @ z
    exact = spla.spsolve(sp.csc_matrix(A), b) if debug else None
    last = np.inf
    for it in range(1, max_iter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if debug:
            e = exact - x
            enorm = float(e @ (A @ e))
            if enorm > last * (1 + 1e-10) + 1e-300:
                raise AssertionError(f"PCG error energy increased at iteration {it}")
            last = enorm
        if np.linalg.norm(r) <= tol * bnorm:
            # guard against drift of the recursive residual
            if np.linalg.norm(b - A @ x) <= tol * bnorm:
                return x, it
            r = b - A @ x
        z = apply_prec(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(b - A @ x) / bnorm
    raise SolverError(f"PCG did not converge in {max_iter} iterations", res)


def jacobi(A):
    d = A.diagonal()
    if np.any(d <= 0):
        raise NotPositiveDefiniteError("non-positive diagonal entry")
    inv = 1.0 / d
    return lambda r: inv * r


def amg(A):
    import pyamg

    # pyamg draws its spectral-radius start vectors from the global RNG
    state = np.random.get_state()
    np.random.seed(0)
    try:
        ml = pyamg.smoothed_aggregation_solver(sp.csr_matrix(A), symmetry="symmetric")
    finally:
        np.random.set_state(state)
    prec = ml.aspreconditioner(cycle="V")
    return lambda r: prec @ r


class Solver:
    """Bound solver for one matrix (factorized or preconditioned once)."""

    def __init__(self, A, cfg: SpdSolver = SpdSolver()):
        self.cfg = cfg
        self.strategy = cfg.resolve(A.shape[0])
        self.iterations = 0
        self._fact = None
        self.update(A)

    def update(self, A):
        """Rebind to a new matrix with the same sparsity pattern."""
        self.A = sp.csr_matrix(A)
        if self.strategy is Strategy.DIRECT_CHOLESKY:
            if self._fact is None:
                self._fact = Factorization(self.A)
            else:
                self._fact.refactor(self.A)
        elif self.strategy is Strategy.PCG_JACOBI:
            self.prec = jacobi(self.A)
        else:
            self.prec = amg(self.A)

    def __call__(self, b: np.ndarray, x0=None) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape != (self.A.shape[0],):
            raise ValueError("right-hand side has wrong dimension")
        if self.strategy is Strategy.DIRECT_CHOLESKY:
            x = self._fact(b)
            bn = np.linalg.norm(b)
            if np.linalg.norm(self.A @ x - b) > 1e-12 * bn:
                # one step of iterative refinement
                x = x + self._fact(b - self.A @ x)
            return x
        x, self.iterations = pcg(
            self.A, b, self.prec, self.cfg.tol, self.cfg.max_iter, x0, self.cfg.debug
        )
        return x


def solve(A, b, cfg: SpdSolver = SpdSolver()) -> np.ndarray:
    return Solver(A, cfg)(b)
