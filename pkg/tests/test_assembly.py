import math

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse.linalg as spla
import sympy
from hypothesis import given, strategies as st

from gpfem.assembly import (
    Potential,
    assemble_density,
    assemble_mass,
    assemble_potential,
    assemble_stiffness,
    potential_preset,
)
from gpfem.elements import DiscreteField, ElementKind, integrate, quad_gradients, quad_values
from gpfem.interp import interpolate

from conftest import SQUARE, square_space


def _sym_err(A):
    return abs(A - A.T).max() / max(abs(A).max(), 1e-300)


@pytest.mark.parametrize("kind", list(ElementKind))
def test_shared_pattern_and_symmetry(kind, rng):
    s = square_space(4, kind)
    w = DiscreteField(s, rng.standard_normal(s.n_free))
    mats = [assemble_stiffness(s), assemble_mass(s), assemble_potential(s, Potential.sin_well()),
            assemble_density(s, w)]
    for A in mats:
        assert _sym_err(A) <= 1e-13
        assert np.array_equal(A.indptr, mats[0].indptr) and np.array_equal(A.indices, mats[0].indices)
        assert A.has_sorted_indices


def test_stiffness_affine_energy():
    s = square_space(4).unmasked()
    v = interpolate(s, lambda x, y: 1.0 + 0.5 * x - 2.0 * y)
    K = assemble_stiffness(s)
    assert v.coeffs @ K @ v.coeffs == pytest.approx((0.25 + 4.0) * 4.0, rel=1e-12)


def test_stiffness_single_cell_bubble():
    # cell shape function solved symbolically from the five mean conditions
    x, y = sympy.symbols("x y")
    a, b, c, d, e = sympy.symbols("a b c d e")
    p = a + b * x + c * y + d * x**2 + e * y**2
    half = sympy.Rational(1, 2)
    eqs = [
        half * sympy.integrate(p.subs(y, -1), (x, -1, 1)),
        half * sympy.integrate(p.subs(y, 1), (x, -1, 1)),
        half * sympy.integrate(p.subs(x, -1), (y, -1, 1)),
        half * sympy.integrate(p.subs(x, 1), (y, -1, 1)),
        sympy.integrate(p, (x, -1, 1), (y, -1, 1)) / 4 - 1,
    ]
    phi = p.subs(sympy.solve(eqs, [a, b, c, d, e]))
    exact = float(sympy.integrate(sympy.diff(phi, x) ** 2 + sympy.diff(phi, y) ** 2, (x, -1, 1), (y, -1, 1)))
    K = assemble_stiffness(square_space(1))
    assert K.shape == (1, 1)
    assert K[0, 0] == pytest.approx(exact, rel=1e-13)


def test_laplace_lower_bound_n64():
    s = square_space(64)
    lam = spla.eigsh(assemble_stiffness(s), k=1, M=assemble_mass(s), sigma=0, which="LM")[0][0]
    assert lam < math.pi**2 / 2
    assert lam == pytest.approx(math.pi**2 / 2, abs=1e-2)


def test_mass_of_one_is_area():
    s = square_space(8).unmasked()
    one = interpolate(s, lambda x, y: np.ones_like(x))
    assert one.coeffs @ assemble_mass(s) @ one.coeffs == pytest.approx(4.0, rel=1e-12)


@pytest.mark.parametrize("n", [4, 8, 16])
def test_mass_spd(n):
    sla.cholesky(assemble_mass(square_space(n)).toarray())


def test_potential_zero_and_constant():
    s = square_space(4)
    assert abs(assemble_potential(s, Potential.zero())).max() == 0
    M = assemble_mass(s)
    assert abs(assemble_potential(s, Potential.constant(2.5)) - 2.5 * M).max() <= 1e-13 * abs(M).max()


def test_sin_well_integral():
    s = square_space(8).unmasked()
    one = interpolate(s, lambda x, y: np.ones_like(x))
    val = one.coeffs @ assemble_potential(s, Potential.sin_well()) @ one.coeffs
    assert val == pytest.approx(3.0, abs=1e-6)


def test_density_special_cases(rng):
    s = square_space(4).unmasked()
    assert abs(assemble_density(s, s.zeros())).max() == 0
    one = interpolate(s, lambda x, y: np.ones_like(x))
    M = assemble_mass(s)
    assert abs(assemble_density(s, one) - M).max() <= 1e-13


def test_density_quartic_two_paths(rng):
    s = square_space(8)
    u = DiscreteField(s, rng.standard_normal(s.n_free))
    direct = integrate(s, quad_values(s, u.coeffs) ** 4)
    assert u.coeffs @ assemble_density(s, u) @ u.coeffs == pytest.approx(direct, rel=1e-12)


def test_density_space_mismatch():
    with pytest.raises(ValueError):
        assemble_density(square_space(4), square_space(2).zeros())


def test_galerkin_consistency(rng):
    s = square_space(8)
    V = Potential.harmonic_stirrer()
    u = DiscreteField(s, rng.standard_normal(s.n_free))
    beta = 3.0
    A = assemble_stiffness(s) + assemble_potential(s, V) + beta * assemble_density(s, u)
    vals, grads = quad_values(s, u.coeffs), quad_gradients(s, u.coeffs)
    x, y = s.quad_coords
    direct = integrate(s, np.sum(grads**2, -1) + V(x, y) * vals**2 + beta * vals**4)
    assert u.coeffs @ A @ u.coeffs == pytest.approx(direct, rel=1e-12)


def test_presets_nonnegative():
    x, y = np.meshgrid(np.linspace(-8, 8, 101), np.linspace(-8, 8, 101))
    for name in ("ZERO", "HARMONIC_ANISO", "SIN_WELL", "HARMONIC_STIRRER"):
        assert potential_preset(name)(x, y).min() >= -1e-15
    with pytest.raises(ValueError):
        potential_preset("nope")


@given(st.integers(0, 2**32 - 1), st.sampled_from(list(ElementKind)))
def test_forms_semidefinite(seed, kind):
    r = np.random.default_rng(seed)
    s = _SPACES[kind]
    v = r.standard_normal(s.n_free)
    w = DiscreteField(s, r.standard_normal(s.n_free))
    assert v @ assemble_stiffness(s) @ v >= 0
    assert v @ assemble_mass(s) @ v > 0
    assert v @ assemble_potential(s, Potential.harmonic_aniso()) @ v >= 0
    assert v @ assemble_density(s, w) @ v >= 0


_SPACES = {k: square_space(3, k) for k in ElementKind}


def test_assembly_deterministic(rng):
    s = square_space(8)
    u = DiscreteField(s, rng.standard_normal(s.n_free))
    t = square_space(8)
    a, b = assemble_density(s, u), assemble_density(t, DiscreteField(t, u.coeffs.copy()))
    assert np.array_equal(a.data, b.data)
