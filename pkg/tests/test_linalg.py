import numpy as np
import pytest
import scipy.sparse as sp

from gpfem import linalg
from gpfem.assembly import assemble_mass, assemble_stiffness
from gpfem.linalg import NotPositiveDefiniteError, SolverError, SpdSolver, Strategy, Solver, pcg, solve

from conftest import square_space

STRATEGIES = [SpdSolver(Strategy.DIRECT_CHOLESKY), SpdSolver(Strategy.PCG_JACOBI), SpdSolver(Strategy.PCG_AMG)]


@pytest.mark.parametrize("cfg", STRATEGIES)
def test_identity(cfg, rng):
    b = rng.standard_normal(10)
    assert np.allclose(solve(sp.identity(10, format="csr"), b, cfg), b, atol=1e-14)


@pytest.mark.parametrize("cfg", STRATEGIES)
def test_mass_solve_of_ones(cfg):
    M = assemble_mass(square_space(8))
    one = np.ones(M.shape[0])
    assert np.allclose(solve(M, M @ one, cfg), one, atol=1e-12)


@pytest.mark.parametrize("strategy", [Strategy.PCG_JACOBI, Strategy.PCG_AMG])
def test_pcg_agrees_with_direct(strategy, rng):
    s = square_space(64)
    A = assemble_stiffness(s) + assemble_mass(s)
    b = rng.standard_normal(A.shape[0])
    x = solve(A, b, SpdSolver(strategy))
    y = solve(A, b, SpdSolver(Strategy.DIRECT_CHOLESKY))
    assert np.linalg.norm(x - y) <= 1e-10 * np.linalg.norm(y)
    assert np.linalg.norm(A @ x - b) <= 1e-13 * np.linalg.norm(b) * 1.0001


def test_direct_residual_contract(rng):
    s = square_space(32)
    A = assemble_stiffness(s) + assemble_mass(s)
    b = rng.standard_normal(A.shape[0])
    x = solve(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_pcg_debug_monotone_energy(rng):
    s = square_space(16)
    A = assemble_stiffness(s) + assemble_mass(s)
    b = rng.standard_normal(A.shape[0])
    x, it = pcg(A, b, linalg.jacobi(A), tol=1e-13, debug=True)
    assert it > 1 and np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_pcg_nonconvergence_carries_residual(rng):
    A = assemble_stiffness(square_space(32))
    b = rng.standard_normal(A.shape[0])
    with pytest.raises(SolverError) as err:
        solve(A, b, SpdSolver(Strategy.PCG_JACOBI, max_iter=3))
    assert err.value.residual > 1e-13


def test_cholesky_rejects_indefinite():
    A = sp.diags([1.0, -1.0, 2.0]).tocsr()
    with pytest.raises(NotPositiveDefiniteError):
        solve(A, np.ones(3))


def test_superlu_fallback_rejects_indefinite(monkeypatch):
    monkeypatch.setattr(linalg, "HAVE_CHOLMOD", False)
    A = sp.diags([1.0, -1.0, 2.0]).tocsr()
    with pytest.raises(NotPositiveDefiniteError):
        linalg.Factorization(A)
    B = sp.diags([1.0, 3.0, 2.0]).tocsr()
    assert np.allclose(linalg.Factorization(B)(np.array([1.0, 3.0, 2.0])), 1.0)


def test_wrong_rhs_dimension():
    with pytest.raises(ValueError):
        Solver(sp.identity(3, format="csr"))(np.ones(4))


@pytest.mark.parametrize("cfg", STRATEGIES)
def test_bitwise_repeatable(cfg, rng):
    s = square_space(16)
    A = assemble_stiffness(s) + assemble_mass(s)
    b = rng.standard_normal(A.shape[0])
    assert np.array_equal(solve(A, b, cfg), solve(A, b, cfg))


def test_default_strategy_resolution(monkeypatch):
    assert SpdSolver().resolve(1000) is Strategy.DIRECT_CHOLESKY
    monkeypatch.setattr(linalg, "HAVE_CHOLMOD", False)
    assert SpdSolver().resolve(linalg.DIRECT_LIMIT + 1) is Strategy.PCG_AMG
    assert SpdSolver(Strategy.PCG_JACOBI).resolve(10) is Strategy.PCG_JACOBI


def test_refactor_same_pattern(rng):
    s = square_space(8)
    K, M = assemble_stiffness(s), assemble_mass(s)
    solver = Solver(K + M)
    solver.update(K + 2 * M)
    b = rng.standard_normal(K.shape[0])
    assert np.allclose((K + 2 * M) @ solver(b), b, atol=1e-12)
