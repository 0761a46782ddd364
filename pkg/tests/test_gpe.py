import math

import numpy as np
import pytest
import scipy.linalg as sla

from gpfem.assembly import Potential, assemble_mass, assemble_stiffness
from gpfem.elements import DiscreteField, ElementKind
from gpfem.gpe import (
    FlowConfig,
    GpeProblem,
    InitialGuess,
    NonConvergenceError,
    eigenvalue,
    energy,
    flow_step,
    initial_guess,
    normalize,
    solve_ground_state,
)
from gpfem.interp import bubble, interpolate

from conftest import SQUARE, square_space


def example62(n, kind=ElementKind.EQ1ROT):
    return GpeProblem(square_space(n, kind), Potential.sin_well(), 1.0)


def test_normalize_properties(rng):
    p = example62(8)
    v = DiscreteField(p.space, rng.standard_normal(p.space.n_free))
    w = normalize(p, v)
    assert w.coeffs @ p.mass @ w.coeffs == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(normalize(p, w).coeffs, w.coeffs, atol=1e-15)
    assert np.allclose(normalize(p.space, 7 * v).coeffs, w.coeffs, atol=1e-15)
    with pytest.raises(ValueError):
        normalize(p, p.space.zeros())


def test_bubble_normalization_factor():
    s = square_space(8)
    v = interpolate(s, bubble(SQUARE))
    scale = normalize(s, v).coeffs[0] / v.coeffs[0]
    # (16/15)^2 = 256/225 is the squared L2 norm of the exact bubble
    assert scale == pytest.approx(math.sqrt(225 / 256), abs=5e-3)


def test_eigenvalue_zero_field():
    p = example62(4)
    with pytest.raises(ValueError):
        eigenvalue(p, p.space.zeros())


def test_energy_and_eigenvalue_relation(rng):
    # lambda = 2E + beta/2 int u^4 for normalized u
    p = GpeProblem(square_space(8), Potential.sin_well(), 5.0)
    u = normalize(p, DiscreteField(p.space, rng.standard_normal(p.space.n_free)))
    from gpfem.gpe import quartic_integral

    q = quartic_integral(p.space, u.coeffs)
    assert eigenvalue(p, u) == pytest.approx(2 * energy(p, u) + 0.5 * p.beta * q, rel=1e-13)


def test_first_step_decreases_energy():
    p = example62(8)
    u = initial_guess(p)
    step = flow_step(p, u)
    assert energy(p, step.u) < energy(p, u)
    assert step.u.coeffs @ p.mass @ step.u.coeffs == pytest.approx(1.0, abs=1e-13)


def test_linear_inverse_iteration_matches_dense():
    p = GpeProblem(square_space(8), Potential.zero(), 0.0)
    gs = solve_ground_state(p)
    lam = sla.eigh(assemble_stiffness(p.space).toarray(), assemble_mass(p.space).toarray(),
                   eigvals_only=True)[0]
    assert gs.eigenvalue == pytest.approx(lam, abs=1e-10)
    lams = [h[1] for h in gs.history]
    assert all(b <= a + 1e-12 for a, b in zip(lams, lams[1:]))


def test_fixed_point():
    p = example62(8)
    gs = solve_ground_state(p)
    step = flow_step(p, gs.u)
    assert step.residual <= 1e-12
    assert np.allclose(step.u.coeffs, gs.u.coeffs, atol=1e-10)


@pytest.mark.parametrize("n, e, lam", [(8, 2.795872, 5.872934), (64, 2.826281, 5.933812)])
def test_example62_values(n, e, lam):
    gs = solve_ground_state(example62(n))
    assert gs.energy == pytest.approx(e, abs=5e-6)
    assert gs.eigenvalue == pytest.approx(lam, abs=5e-6)
    assert gs.residual < 1e-12
    assert gs.u.coeffs @ example62(n).mass @ gs.u.coeffs == pytest.approx(1.0, abs=1e-12)
    assert p_sign(gs) >= 0


def p_sign(gs):
    from gpfem.assembly import load_vector

    return load_vector(gs.u.space) @ gs.u.coeffs


def test_energy_monotone_along_flow():
    for p in (example62(16), GpeProblem(square_space(16), Potential.sin_well(), 10.0)):
        es = [h[0] for h in solve_ground_state(p).history]
        assert all(b <= a + 1e-12 for a, b in zip(es, es[1:]))


def test_q2_laplace_upper_bound():
    gs = solve_ground_state(GpeProblem(square_space(64, ElementKind.Q2), Potential.zero(), 0.0))
    assert math.pi**2 / 2 <= gs.eigenvalue <= math.pi**2 / 2 + 1e-3


def test_nonconvergence_carries_history():
    with pytest.raises(NonConvergenceError) as err:
        solve_ground_state(example62(8), FlowConfig(max_iter=3))
    assert len(err.value.history) == 4


def test_given_initial_guess_and_damped_step():
    p = example62(8)
    ref = solve_ground_state(p)
    with pytest.raises(ValueError):
        solve_ground_state(p, FlowConfig(initial=InitialGuess.GIVEN))
    gs = solve_ground_state(p, FlowConfig(step=0.5, initial=InitialGuess.GIVEN), u0=initial_guess(p))
    assert gs.energy == pytest.approx(ref.energy, abs=1e-12)
    assert gs.iterations > ref.iterations
    with pytest.raises(ValueError):
        FlowConfig(step=0.0)
