"""Property suites run by ``gpfem selftest``.

Each suite returns a :class:`SuiteResult`.  ``corrupt_basis`` swaps in an EQ1rot
basis with perturbed coefficients so the orthogonality suite can be shown to
fail; it exists only for negative testing.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .analysis import (
    consistency_functional,
    h1_norm,
    h1_seminorm,
    jump_seminorm,
    mixed_derivative_check,
    sample_on_fine,
)
from .assembly import Potential
from .elements import (
    DiscreteField,
    ElementKind,
    Quadrature,
    ReferenceBasis,
    build_space,
    integrate,
    quad_gradients,
    reference_basis,
)
from .gpe import GpeProblem, energy, normalize
from .interp import interpolate_pi_h
from .mesh import Domain, build_mesh

SQUARE = Domain.square(-1.0, 1.0)
LEVELS = (8, 16, 32, 64)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def __post_init__(self):
        self.passed = bool(self.passed)


def corrupted_basis(rng: np.random.Generator, scale: float = 1e-2) -> ReferenceBasis:
    good = reference_basis(ElementKind.EQ1ROT)
    bad = good.coeffs + scale * rng.standard_normal(good.coeffs.shape)
    return ReferenceBasis(good.kind, good.exponents, bad)


def _random_field(space, rng) -> DiscreteField:
    return DiscreteField(space, rng.uniform(-1.0, 1.0, space.n_free))


def quadrature_exactness(rng, degree: int = 9, tol: float = 1e-13) -> SuiteResult:
    """Order-5 tensor Gauss integrates x^a y^b exactly for a, b <= 9."""
    q = Quadrature.gauss(5)
    worst = 0.0
    for a in range(degree + 1):
        for b in range(degree + 1):
            exact = (2.0 / (a + 1) if a % 2 == 0 else 0.0) * (2.0 / (b + 1) if b % 2 == 0 else 0.0)
            got = q.weights @ (q.points[:, 0] ** a * q.points[:, 1] ** b)
            worst = max(worst, abs(got - exact))
    return SuiteResult("quadrature-exactness", bool(worst <= tol), f"max error {worst:.2e}")


def orthogonality(rng, corrupt: bool = False, n_samples: int = 20, tol: float = 1e-10) -> SuiteResult:
    """(grad_h(f - Pi_h f), grad_h v_h) = 0 for Q2 fields f on the same and a finer mesh."""
    worst = 0.0
    for n in (4, 8):
        mesh = build_mesh(SQUARE, n, n)
        basis = corrupted_basis(rng) if corrupt else None
        space = build_space(mesh, ElementKind.EQ1ROT, basis=basis)
        for ratio in (1, 4):
            fs = build_space(build_mesh(SQUARE, n * ratio, n * ratio), ElementKind.Q2)
            f = _random_field(fs, rng)
            pf = interpolate_pi_h(space, f)
            _, pg = sample_on_fine(pf, fs.mesh, fs.quad.points)
            diff = quad_gradients(fs, f.coeffs) - pg
            gf = h1_seminorm(f)
            for _ in range(n_samples):
                v = _random_field(space, rng)
                _, vg = sample_on_fine(v, fs.mesh, fs.quad.points)
                inner = integrate(fs, np.sum(diff * vg, axis=-1))
                worst = max(worst, abs(inner) / (gf * h1_seminorm(v)))
    return SuiteResult("orthogonality", worst <= tol, f"max scaled inner product {worst:.2e}")


def mixed_derivative(rng, n_samples: int = 20, tol: float = 1e-13) -> SuiteResult:
    space = build_space(build_mesh(SQUARE, 8, 8), ElementKind.EQ1ROT)
    worst = max(mixed_derivative_check(space, _random_field(space, rng)) for _ in range(n_samples))
    return SuiteResult("mixed-derivative", worst <= tol, f"max |d2v/dxdy| {worst:.2e}")


# smooth test function u = cos(a x) cos(a y) vanishing on the boundary of [-1, 1]^2
_A = 0.5 * math.pi
_U_H1 = math.sqrt(1.0 + 2.0 * _A**2)


def _grad_u(x, y):
    return (-_A * np.sin(_A * x) * np.cos(_A * y), -_A * np.cos(_A * x) * np.sin(_A * y))


def _div_grad_u(x, y):
    return -2.0 * _A**2 * np.cos(_A * x) * np.cos(_A * y)


def _integrand_scale(space, v) -> float:
    # size of the volume-form integrand; the functional itself is O(h) smaller
    x, y = space.quad_coords
    gx, gy = _grad_u(x, y)
    vals = space.local(v.coeffs) @ space.quad_values.T
    grads = quad_gradients(space, v.coeffs)
    return integrate(space, np.abs(vals * _div_grad_u(x, y)) + np.abs(gx * grads[..., 0] + gy * grads[..., 1]))


def patch_test(rng, n_samples: int = 20, growth: float = 1.3, tol: float = 1e-11) -> SuiteResult:
    """Consistency error of EQ1rot scales like h; conforming fields give zero."""
    ratios = []
    form_gap = 0.0
    for n in LEVELS:
        space = build_space(build_mesh(SQUARE, n, n), ElementKind.EQ1ROT)
        h = space.mesh.h
        worst = 0.0
        for _ in range(n_samples):
            v = _random_field(space, rng)
            v = v * (1.0 / h1_norm(v))
            vol = consistency_functional(space, v, _grad_u, _div_grad_u, form="volume")
            face = consistency_functional(space, v, _grad_u, form="face")
            form_gap = max(form_gap, abs(vol - face) / _integrand_scale(space, v))
            worst = max(worst, abs(vol) / (h * _U_H1))
        ratios.append(worst)
    bounded = all(b <= growth * a for a, b in zip(ratios, ratios[1:]))
    q2 = build_space(build_mesh(SQUARE, 8, 8), ElementKind.Q2)
    conf = abs(consistency_functional(q2, _random_field(q2, rng), _grad_u, _div_grad_u))
    ok = bounded and form_gap <= 1e-10 and conf <= tol
    detail = (
        "ratios " + ", ".join(f"{r:.3g}" for r in ratios)
        + f"; volume/face gap {form_gap:.1e}; conforming {conf:.1e}"
    )
    return SuiteResult("patch-test", ok, detail)


def jump_bound(rng, n_samples: int = 20, growth: float = 1.3, tol: float = 1e-11) -> SuiteResult:
    """Scaled jumps are bounded by the broken H1 norm; conforming fields have none."""
    ratios = []
    for n in LEVELS:
        space = build_space(build_mesh(SQUARE, n, n), ElementKind.EQ1ROT)
        worst = 0.0
        for _ in range(n_samples):
            v = _random_field(space, rng)
            worst = max(worst, jump_seminorm(space, v) / h1_norm(v))
        ratios.append(worst)
    bounded = all(b <= growth * a for a, b in zip(ratios, ratios[1:]))
    q2 = build_space(build_mesh(SQUARE, 8, 8), ElementKind.Q2)
    conf = jump_seminorm(q2, _random_field(q2, rng))
    detail = "ratios " + ", ".join(f"{r:.3g}" for r in ratios) + f"; conforming {conf:.1e}"
    return SuiteResult("jump-bound", bounded and conf <= tol, detail)


def gradient_check(rng, eps=(1e-2, 1e-3), beta: float = 10.0) -> SuiteResult:
    """Central differences of the energy approach the analytic gradient at rate 2."""
    space = build_space(build_mesh(SQUARE, 8, 8), ElementKind.EQ1ROT)
    problem = GpeProblem(space, Potential.sin_well(), beta)
    u = normalize(problem, _random_field(space, rng))
    w = _random_field(space, rng)
    grad = problem.operator(u) @ u.coeffs
    exact = float(grad @ w.coeffs)
    mism = []
    for e in eps:
        plus = energy(problem, DiscreteField(space, u.coeffs + e * w.coeffs))
        minus = energy(problem, DiscreteField(space, u.coeffs - e * w.coeffs))
        mism.append(abs((plus - minus) / (2 * e) - exact))
    rate = math.log(mism[0] / mism[1]) / math.log(eps[0] / eps[1])
    return SuiteResult(
        "gradient-check",
        1.8 <= rate <= 2.2,
        f"mismatch {mism[0]:.2e} -> {mism[1]:.2e}, rate {rate:.3f}",
    )


SUITES = {
    "quadrature-exactness": quadrature_exactness,
    "orthogonality": orthogonality,
    "mixed-derivative": mixed_derivative,
    "patch-test": patch_test,
    "jump-bound": jump_bound,
    "gradient-check": gradient_check,
}


def run_selftest(seed: int = 0, corrupt_basis: bool = False, suites=None) -> list[SuiteResult]:
    rng = np.random.default_rng(seed)
    out = []
    for name in suites or SUITES:
        t0 = time.perf_counter()
        fn = SUITES[name]
        res = fn(rng, corrupt=True) if (corrupt_basis and name == "orthogonality") else fn(rng)
        res.seconds = time.perf_counter() - t0
        out.append(res)
    return out
