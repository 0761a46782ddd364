"""Interpolation, point evaluation and transfer between nested meshes."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .elements import (
    DEFAULT_QUAD_ORDER,
    DiscreteField,
    ElementKind,
    FeSpace,
    gauss_line,
)
from .mesh import HORIZONTAL, Mesh, refine_map

# reference points of the four local edges, parametrized along +x / +y
_EDGE_MAPS = (
    lambda t: np.column_stack([t, -np.ones_like(t)]),  # bottom
    lambda t: np.column_stack([np.ones_like(t), t]),  # right
    lambda t: np.column_stack([t, np.ones_like(t)]),  # top
    lambda t: np.column_stack([-np.ones_like(t), t]),  # left
)


def evaluate(field: DiscreteField, x, y) -> np.ndarray:
    """Point values of a discrete field (cell chosen by ``Mesh.locate``)."""
    space = field.space
    x = np.asarray(x, dtype=float)
    cell, xi, eta = space.mesh.locate(x.ravel(), np.ravel(y))
    loc = space.local(field.coeffs)[cell]
    phi = space.basis.values(np.column_stack([xi, eta]))
    return np.einsum("pl,pl->p", loc, phi).reshape(x.shape)


def face_traces(space: FeSpace, coeffs: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Traces of a field on every face at 1D reference parameters ``t``.

    Returns shape (faces, 2, points); side 0 is the face's first cell, side 1
    the second cell (NaN on boundary faces).
    """
    mesh = space.mesh
    loc = space.local(coeffs)
    out = np.full((mesh.n_faces, 2, len(t)), np.nan)
    cells = np.arange(mesh.n_cells)
    for e, ref in enumerate(_EDGE_MAPS):
        faces = mesh.cell_faces[:, e]
        vals = loc @ space.basis.values(ref(t)).T
        side = np.where(mesh.face_cells[faces, 0] == cells, 0, 1)
        out[faces, side] = vals
    return out


def jumps(space: FeSpace, coeffs: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Jump (first minus second cell) on each face; the trace on boundary faces."""
    tr = face_traces(space, coeffs, t)
    bnd = space.mesh.face_cells[:, 1] < 0
    return np.where(bnd[:, None], tr[:, 0], tr[:, 0] - tr[:, 1])


def _sub_tables(basis, ratio_x: int, ratio_y: int, ref_points: np.ndarray):
    # basis values/gradients of a coarse cell at the reference points of each
    # of its ratio_x * ratio_y sub-cells, indexed [sub_j, sub_i]
    vals = np.empty((ratio_y, ratio_x, len(ref_points), basis.n_local))
    grads = np.empty(vals.shape + (2,))
    for q in range(ratio_y):
        for p in range(ratio_x):
            pts = np.column_stack(
                [
                    -1.0 + (2 * p + 1 + ref_points[:, 0]) / ratio_x,
                    -1.0 + (2 * q + 1 + ref_points[:, 1]) / ratio_y,
                ]
            )
            vals[q, p] = basis.values(pts)
            grads[q, p] = basis.gradients(pts)
    return vals, grads


def sample_on_fine(
    field: DiscreteField, fine: Mesh, ref_points: np.ndarray, gradients: bool = True
):
    """Values (and broken gradients) of a coarse field at reference points of
    every cell of a nested finer mesh.

    Shapes: (fine cells, points) and (fine cells, points, 2).
    """
    space = field.space
    coarse = space.mesh
    refine_map(coarse, fine)  # validates nesting
    rx, ry = fine.nx // coarse.nx, fine.ny // coarse.ny
    vt, gt = _sub_tables(space.basis, rx, ry, ref_points)
    gt = gt * space.grad_scale
    loc = space.local(field.coeffs).reshape(coarse.ny, coarse.nx, -1)
    npts = len(ref_points)
    vals = np.empty((coarse.ny, ry, coarse.nx, rx, npts))
    grads = np.empty(vals.shape + (2,)) if gradients else None
    for q in range(ry):
        for p in range(rx):
            vals[:, q, :, p] = loc @ vt[q, p].T
            if gradients:
                grads[:, q, :, p] = np.einsum("jil,pld->jipd", loc, gt[q, p])
    vals = vals.reshape(fine.n_cells, npts)
    if gradients:
        grads = grads.reshape(fine.n_cells, npts, 2)
    return vals, grads


def _function_averages(mesh: Mesh, f: Callable, order: int, sub: int):
    """Face and cell means of a callable by composite Gauss rules."""
    t, w = gauss_line(order)
    ts = ((np.arange(sub)[:, None] * 2 + 1 + t[None, :]) / sub - 1.0).ravel()
    ws = np.tile(w, sub) / sub
    mids, lengths = mesh.face_geometry()
    horiz = mesh.face_orientation == HORIZONTAL
    fx = mids[:, 0:1] + np.where(horiz, 0.5 * mesh.hx, 0.0)[:, None] * ts
    fy = mids[:, 1:2] + np.where(horiz, 0.0, 0.5 * mesh.hy)[:, None] * ts
    face_avg = 0.5 * f(fx, fy) @ ws
    px, py = np.meshgrid(ts, ts)
    ref = np.column_stack([px.ravel(), py.ravel()])
    wc = np.outer(ws, ws).ravel()
    cx, cy = mesh.map_points(ref)
    cell_avg = 0.25 * f(cx, cy) @ wc
    return face_avg, cell_avg


def _field_averages(field: DiscreteField, target: Mesh):
    """Exact face and cell means over ``target`` of a field on a nested finer mesh."""
    space = field.space
    fine = space.mesh
    refine_map(target, fine)
    rx, ry = fine.nx // target.nx, fine.ny // target.ny
    # fine cell means
    w = space.quad.weights
    fine_cell = (space.local(field.coeffs) @ space.quad_values.T) @ w / 4.0
    cell_avg = fine_cell.reshape(target.ny, ry, target.nx, rx).mean(axis=(1, 3)).ravel()
    # fine face means from the first adjacent cell (exact for polynomial traces)
    t, wt = gauss_line(DEFAULT_QUAD_ORDER)
    tr = face_traces(space, field.coeffs, t)[:, 0]
    fine_face = 0.5 * tr @ wt
    nh = fine.n_horizontal
    fh = fine_face[:nh].reshape(fine.ny + 1, target.nx, rx)[::ry].mean(axis=2)
    fv = fine_face[nh:].reshape(fine.nx + 1, target.ny, ry)[::rx].mean(axis=2)
    face_avg = np.concatenate([fh.ravel(), fv.ravel()])
    return face_avg, cell_avg


def interpolate_pi_h(
    space: FeSpace, f: Callable | DiscreteField, order: int = DEFAULT_QUAD_ORDER, sub: int = 1
) -> DiscreteField:
    """EQ1rot interpolant preserving face and cell means of ``f``.

    ``f`` is a vectorized callable ``f(x, y)`` or a discrete field on a nested
    mesh at least as fine as ``space.mesh``.
    """
    if space.kind is not ElementKind.EQ1ROT:
        raise ValueError("interpolate_pi_h requires an EQ1ROT space")
    if isinstance(f, DiscreteField):
        face_avg, cell_avg = _field_averages(f, space.mesh)
    else:
        face_avg, cell_avg = _function_averages(space.mesh, f, order, sub)
    full = np.concatenate([face_avg, cell_avg])
    return DiscreteField(space, full[space.free])


def interpolate_nodal(space: FeSpace, f: Callable | DiscreteField) -> DiscreteField:
    """Q2 nodal interpolant of a callable or of a field on any mesh of the domain."""
    if space.kind is not ElementKind.Q2:
        raise ValueError("nodal interpolation requires a Q2 space")
    mesh = space.mesh
    px, py = 2 * mesh.nx + 1, 2 * mesh.ny + 1
    d = mesh.domain
    xs = np.linspace(d.xmin, d.xmax, px)
    ys = np.linspace(d.ymin, d.ymax, py)
    X, Y = np.meshgrid(xs, ys)
    X, Y = X.ravel(), Y.ravel()
    if isinstance(f, DiscreteField):
        vals = evaluate(f, X, Y)
    else:
        vals = np.asarray(f(X, Y), dtype=float) * np.ones_like(X)
    return DiscreteField(space, vals[space.free])


def interpolate(space: FeSpace, f) -> DiscreteField:
    if space.kind is ElementKind.EQ1ROT:
        return interpolate_pi_h(space, f)
    return interpolate_nodal(space, f)


def bubble(domain) -> Callable:
    """``(1 - s^2)(1 - t^2)`` in coordinates ``(s, t)`` mapping the domain to ``[-1, 1]^2``."""
    cx, cy = 0.5 * (domain.xmin + domain.xmax), 0.5 * (domain.ymin + domain.ymax)
    ax, ay = 0.5 * (domain.xmax - domain.xmin), 0.5 * (domain.ymax - domain.ymin)

    def f(x, y):
        s, t = (x - cx) / ax, (y - cy) / ay
        return (1 - s**2) * (1 - t**2)

    return f

