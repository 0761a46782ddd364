import math

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from gpfem.analysis import (
    compute_errors,
    consistency_functional,
    eoc,
    h1_norm,
    interpolate_pi_h,
    jump_seminorm,
    l2_norm,
    lower_bound_check,
    mixed_derivative_check,
    mixed_derivative_norm,
    pi0_error,
    project_pi0,
)
from gpfem.elements import DiscreteField, ElementKind, quad_values
from gpfem.interp import evaluate, sample_on_fine

from conftest import square_space


def test_pi_h_affine_exact():
    s = square_space(4).unmasked()
    v = interpolate_pi_h(s, lambda x, y: 1 - 2 * x + 3 * y)
    x, y = s.quad_coords
    assert np.allclose(quad_values(s, v.coeffs), 1 - 2 * x + 3 * y, atol=1e-12)


def test_pi_h_preserves_cell_mean_single_cell():
    s = square_space(1).unmasked()
    v = interpolate_pi_h(s, lambda x, y: x**2)
    assert project_pi0(s, v)[0] == pytest.approx(1 / 3, abs=1e-14)


def test_pi_h_requires_eq1rot():
    with pytest.raises(ValueError):
        interpolate_pi_h(square_space(2, ElementKind.Q2), lambda x, y: x)


def test_pi_h_from_finer_field_matches_callable():
    # a Q2 field on a finer mesh is the interpolant of a biquadratic; both routes agree
    f = lambda x, y: (1 - x**2) * (1 - y**2) * (0.3 + x * y)
    fine = square_space(8, ElementKind.Q2)
    from gpfem.interp import interpolate_nodal

    ff = interpolate_nodal(fine, f)
    a = interpolate_pi_h(square_space(4), ff)
    b = interpolate_pi_h(square_space(4), lambda x, y: evaluate(ff, x, y), sub=2)
    assert np.allclose(a.coeffs, b.coeffs, atol=1e-13)


def test_pi0_examples(rng):
    s = square_space(2).unmasked()
    means = project_pi0(s, lambda x, y: x)
    assert np.allclose(means, [-0.5, 0.5, -0.5, 0.5])
    one = interpolate_pi_h(s, lambda x, y: np.ones_like(x))
    assert pi0_error(one) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("n", [8, 16, 32])
def test_pi0_estimate(n, rng):
    # piecewise Poincare on a rectangle: constant max(hx, hy) / pi
    s = square_space(n)
    from gpfem.analysis import h1_seminorm

    for _ in range(5):
        v = DiscreteField(s, rng.uniform(-1, 1, s.n_free))
        assert pi0_error(v) <= s.mesh.h / math.pi * h1_seminorm(v) * (1 + 1e-12)


def test_eoc():
    assert eoc(4e-2, 1e-2) == pytest.approx(2.0)
    assert eoc(0.0, 1.0) is None and eoc(1.0, -1.0) is None


def test_compute_errors_sign_symmetry(rng):
    ref = DiscreteField(square_space(8, ElementKind.Q2), rng.standard_normal(225))
    u = DiscreteField(square_space(4), rng.standard_normal(square_space(4).n_free))
    e1, e2, e3 = compute_errors(u, ref), compute_errors(-u, ref), compute_errors(u, -ref)
    assert np.allclose(e1, e2, rtol=1e-14) and np.allclose(e1, e3, rtol=1e-14)


def test_compute_errors_of_same_field_is_zero(rng):
    s = square_space(4, ElementKind.Q2)
    u = DiscreteField(s, rng.standard_normal(s.n_free))
    fine = interp_q2_to_fine(u, 8)
    l2, h1 = compute_errors(u, fine)
    assert l2 <= 1e-13 and h1 <= 1e-12


def interp_q2_to_fine(u, n):
    from gpfem.interp import interpolate_nodal

    return interpolate_nodal(square_space(n, ElementKind.Q2), u)


def test_compute_errors_rejects_non_nested(rng):
    with pytest.raises(ValueError):
        compute_errors(square_space(4).zeros(), square_space(6, ElementKind.Q2).zeros())


def test_mixed_derivative(rng):
    s = square_space(8)
    assert mixed_derivative_check(s, DiscreteField(s, rng.standard_normal(s.n_free))) <= 1e-13
    assert mixed_derivative_check(s, s.zeros()) == 0.0
    q = square_space(8, ElementKind.Q2)
    assert mixed_derivative_check(q, DiscreteField(q, rng.standard_normal(q.n_free))) > 1e-3
    assert mixed_derivative_norm(DiscreteField(q, rng.standard_normal(q.n_free))) > 1e-3


def test_jump_seminorm_single_cell_bubble():
    s = square_space(1)
    v = DiscreteField(s, np.ones(1))
    x = sympy.symbols("x")
    trace = sympy.Rational(1, 2) - sympy.Rational(3, 2) * x**2  # cell shape function on y = -1
    per_edge = sympy.integrate(trace**2, (x, -1, 1))
    exact = math.sqrt(float(4 * per_edge / 2))  # four edges, h = 2
    assert jump_seminorm(s, v) == pytest.approx(exact, rel=1e-13)


def test_conforming_field_has_no_jumps(rng):
    q = square_space(8, ElementKind.Q2)
    v = DiscreteField(q, rng.standard_normal(q.n_free))
    assert jump_seminorm(q, v) <= 1e-12


def test_consistency_constant_flux_vanishes(rng):
    s = square_space(8)
    v = DiscreteField(s, rng.standard_normal(s.n_free))
    g = lambda x, y: (np.full_like(x, 0.7), np.full_like(x, -1.3))
    assert abs(consistency_functional(s, v, g, lambda x, y: np.zeros_like(x))) <= 1e-13
    assert abs(consistency_functional(s, v, g, form="face")) <= 1e-13


@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_consistency_two_forms_agree(seed, n):
    r = np.random.default_rng(seed)
    s = square_space(n)
    v = DiscreteField(s, r.uniform(-1, 1, s.n_free))
    a, b = r.uniform(0.5, 2, 2)
    # polynomial flux: both forms are integrated exactly
    g = lambda x, y: (a * x**2 * y + y**3, b * x * y**2 - x**3)
    div = lambda x, y: 2 * a * x * y + 2 * b * x * y
    vol = consistency_functional(s, v, g, div, form="volume")
    face = consistency_functional(s, v, g, form="face")
    assert vol == pytest.approx(face, rel=1e-10, abs=1e-13)


def test_consistency_bad_form():
    s = square_space(2)
    with pytest.raises(ValueError):
        consistency_functional(s, s.zeros(), lambda x, y: (x, y), form="other")
    with pytest.raises(ValueError):
        consistency_functional(s, s.zeros(), lambda x, y: (x, y))


def test_pi_h_interpolation_rates():
    f = lambda x, y: np.cos(0.5 * np.pi * x) * np.cos(0.5 * np.pi * y) * (1 + 0.3 * x)
    from gpfem.interp import interpolate_nodal

    ref = interpolate_nodal(square_space(256, ElementKind.Q2), f)
    errs = [compute_errors(interpolate_pi_h(square_space(n), ref), ref) for n in (8, 16, 32, 64, 128)]
    for (l2a, h1a), (l2b, h1b) in zip(errs, errs[1:]):
        assert abs(eoc(l2a, l2b) - 2) <= 0.15
        assert abs(eoc(h1a, h1b) - 1) <= 0.15


def test_sample_on_fine_matches_point_evaluation(rng):
    s = square_space(4)
    u = DiscreteField(s, rng.standard_normal(s.n_free))
    fine = square_space(8).mesh
    pts = rng.uniform(-0.9, 0.9, (3, 2))
    vals, _ = sample_on_fine(u, fine, pts)
    x, y = fine.map_points(pts)
    assert np.allclose(vals, evaluate(u, x, y), atol=1e-13)


def test_lower_bound_report():
    rep = lower_bound_check({8: 1.0, 16: 1.5, 32: 1.4}, 1.45)
    assert rep.below == [True, False, True]
    assert rep.threshold == 32 and not rep.monotone and not rep.all_below
    rep = lower_bound_check({8: 1.0, 16: 1.2}, 2.0)
    assert rep.all_below and rep.threshold == 8 and rep.monotone
    assert rep.margins == pytest.approx([1.0, 0.8])


def test_norms(rng):
    s = square_space(4).unmasked()
    one = interpolate_pi_h(s, lambda x, y: np.ones_like(x))
    assert l2_norm(one) == pytest.approx(2.0)
    assert h1_norm(one) == pytest.approx(2.0)
