"""Error measurement, convergence orders and structural checks of the EQ1rot space."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .elements import (
    DEFAULT_QUAD_ORDER,
    DiscreteField,
    FeSpace,
    gauss_line,
    integrate,
    quad_gradients,
    quad_values,
)
from .interp import interpolate_pi_h, jumps, sample_on_fine  # noqa: F401  (re-export)
from .mesh import HORIZONTAL


def _field(x) -> DiscreteField:
    return x.u if hasattr(x, "u") else x


def l2_norm(v: DiscreteField) -> float:
    return math.sqrt(integrate(v.space, quad_values(v.space, v.coeffs) ** 2))


def h1_seminorm(v: DiscreteField) -> float:
    g = quad_gradients(v.space, v.coeffs)
    return math.sqrt(integrate(v.space, np.sum(g**2, axis=-1)))


def h1_norm(v: DiscreteField) -> float:
    """Broken H1 norm ``(||v||^2 + ||grad_h v||^2)^(1/2)``."""
    return math.hypot(l2_norm(v), h1_seminorm(v))


def field_errors(coarse: DiscreteField, fine: DiscreteField, sign: float = 1.0):
    """L2 and broken H1 norms of ``sign * coarse - fine`` on the fine mesh."""
    fs = fine.space
    cv, cg = sample_on_fine(coarse, fs.mesh, fs.quad.points)
    dv = sign * cv - quad_values(fs, fine.coeffs)
    dg = sign * cg - quad_gradients(fs, fine.coeffs)
    l2sq = integrate(fs, dv**2)
    semi = integrate(fs, np.sum(dg**2, axis=-1))
    return math.sqrt(l2sq), math.sqrt(l2sq + semi)


def compute_errors(coarse_state, reference):
    """``(l2_error, h1_error)`` of a discrete state against a nested finer reference.

    Both arguments may be ground states or discrete fields.  The coarse state is
    sign-aligned with the reference before differencing.
    """
    coarse, ref = _field(coarse_state), _field(reference)
    fs = ref.space
    cv, _ = sample_on_fine(coarse, fs.mesh, fs.quad.points, gradients=False)
    inner = integrate(fs, cv * quad_values(fs, ref.coeffs))
    return field_errors(coarse, ref, -1.0 if inner < 0 else 1.0)


def eoc(e_coarse: float, e_fine: float) -> float | None:
    """Order ``log2(e_N / e_2N)``; ``None`` when either error is not positive."""
    if not (e_coarse > 0 and e_fine > 0):
        return None
    return math.log2(e_coarse / e_fine)


def project_pi0(space: FeSpace, v: DiscreteField | Callable) -> np.ndarray:
    """Cell means of a discrete field or a callable."""
    if isinstance(v, DiscreteField):
        vals = quad_values(space, v.coeffs)
    else:
        vals = v(*space.quad_coords)
    return vals @ space.quad.weights / 4.0


def pi0_error(v: DiscreteField) -> float:
    """``||v - Pi_0 v||_L2``."""
    space = v.space
    vals = quad_values(space, v.coeffs)
    means = vals @ space.quad.weights / 4.0
    return math.sqrt(integrate(space, (vals - means[:, None]) ** 2))


def _face_normal_signs(space: FeSpace) -> np.ndarray:
    # +1 when the face normal seen from its first cell points along +x / +y
    mesh = space.mesh
    mids, _ = mesh.face_geometry()
    d = mesh.domain
    horiz = mesh.face_orientation == HORIZONTAL
    low = np.where(horiz, np.isclose(mids[:, 1], d.ymin), np.isclose(mids[:, 0], d.xmin))
    return np.where(low, -1.0, 1.0)


def _face_points(space: FeSpace, t: np.ndarray):
    mesh = space.mesh
    mids, lengths = mesh.face_geometry()
    horiz = mesh.face_orientation == HORIZONTAL
    x = mids[:, 0:1] + np.where(horiz, 0.5 * mesh.hx, 0.0)[:, None] * t
    y = mids[:, 1:2] + np.where(horiz, 0.0, 0.5 * mesh.hy)[:, None] * t
    return x, y, lengths, horiz


def consistency_functional(
    space: FeSpace, v: DiscreteField, g: Callable, div_g: Callable | None = None, form: str = "volume"
) -> float:
    """Consistency error ``int v div(g) + g . grad_h v``.

    ``g(x, y)`` returns the pair ``(g1, g2)``.  ``form="volume"`` integrates over
    cells (requires ``div_g``); ``form="face"`` sums ``int_e [v] g.n`` over faces.
    """
    if form == "volume":
        if div_g is None:
            raise ValueError("volume form needs the divergence of g")
        x, y = space.quad_coords
        gx, gy = g(x, y)
        vals = quad_values(space, v.coeffs)
        grads = quad_gradients(space, v.coeffs)
        integrand = vals * div_g(x, y) + gx * grads[..., 0] + gy * grads[..., 1]
        return integrate(space, integrand)
    if form != "face":
        raise ValueError(f"unknown form {form!r}")
    t, w = gauss_line(DEFAULT_QUAD_ORDER)
    x, y, lengths, horiz = _face_points(space, t)
    gx, gy = g(x, y)
    gn = np.where(horiz[:, None], gy, gx) * _face_normal_signs(space)[:, None]
    jv = jumps(space, v.coeffs, t)
    return float(np.sum((jv * gn) @ w * 0.5 * lengths))


def jump_seminorm(space: FeSpace, v: DiscreteField) -> float:
    """``(sum_e h^-1 ||[v]||^2_{L2(e)})^(1/2)``; boundary faces use the trace."""
    t, w = gauss_line(DEFAULT_QUAD_ORDER)
    _, lengths = space.mesh.face_geometry()
    jv = jumps(space, v.coeffs, t)
    total = np.sum((jv**2) @ w * 0.5 * lengths) / space.mesh.h
    return math.sqrt(total)


def mixed_derivative_check(space: FeSpace, v: DiscreteField) -> float:
    """Max of ``|d2 v / dx dy|`` over all quadrature points."""
    mixed = space.basis.mixed(space.quad.points) * (4.0 / (space.mesh.hx * space.mesh.hy))
    vals = space.local(v.coeffs) @ mixed.T
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def mixed_derivative_norm(v: DiscreteField) -> float:
    """``||d2 v / dx dy||_L2`` (broken)."""
    space = v.space
    mixed = space.basis.mixed(space.quad.points) * (4.0 / (space.mesh.hx * space.mesh.hy))
    vals = space.local(v.coeffs) @ mixed.T
    return math.sqrt(integrate(space, vals**2))


@dataclass
class LowerBoundReport:
    levels: list
    energies: list
    reference: float
    below: list
    margins: list
    steps: list  # E(2N) - E(N)
    monotone: bool
    threshold: int | None  # smallest level from which every level is below

    @property
    def all_below(self) -> bool:
        return all(self.below)


def lower_bound_check(energies: dict, conforming_energy: float, tol: float = 1e-10) -> LowerBoundReport:
    """Compare nonconforming energies (by level) with a conforming fine-mesh energy."""
    levels = sorted(energies)
    es = [energies[n] for n in levels]
    margins = [conforming_energy - e for e in es]
    below = [m > 0 for m in margins]
    steps = [b - a for a, b in zip(es, es[1:])]
    threshold = None
    for k in range(len(levels) - 1, -1, -1):
        if not below[k]:
            break
        threshold = levels[k]
    return LowerBoundReport(
        levels, es, conforming_energy, below, margins, steps,
        all(s >= -tol for s in steps), threshold,
    )

