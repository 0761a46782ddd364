"""Reference elements, tensor Gauss quadrature and global DOF maps.

Both element kinds are represented the same way: a list of monomial exponents
``x^a y^b`` on the reference square ``[-1, 1]^2`` and a coefficient matrix whose
column ``i`` holds the expansion of shape function ``i``.  Derivatives are
therefore evaluated analytically from the exponents.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial.legendre import leggauss

from .mesh import Mesh

DEFAULT_QUAD_ORDER = 5


class ElementKind(str, enum.Enum):
    EQ1ROT = "EQ1ROT"
    Q2 = "Q2"

    @property
    def n_local(self) -> int:
        return 5 if self is ElementKind.EQ1ROT else 9


@dataclass(frozen=True)
class Quadrature:
    """Tensor Gauss-Legendre rule on ``[-1, 1]^2`` with ``order`` points per axis."""

    order: int
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @classmethod
    def gauss(cls, order: int) -> "Quadrature":
        if order < 1:
            raise ValueError("quadrature order must be >= 1")
        x, w = leggauss(order)
        # x varies fastest
        px, py = np.meshgrid(x, x)
        pts = np.column_stack([px.ravel(), py.ravel()])
        wts = np.outer(w, w).ravel()
        return cls(order, pts, wts)


def gauss_line(order: int = DEFAULT_QUAD_ORDER):
    """1D Gauss-Legendre points and weights on ``[-1, 1]``."""
    return leggauss(order)


EQ1ROT_EXPONENTS = np.array([(0, 0), (1, 0), (0, 1), (2, 0), (0, 2)])
Q2_EXPONENTS = np.array([(a, b) for b in range(3) for a in range(3)])
Q2_NODES = np.array([(a, b) for b in (-1.0, 0.0, 1.0) for a in (-1.0, 0.0, 1.0)])


def _monomial_edge_mean(a: int, b: int, edge: int) -> float:
    # mean of x^a y^b over a reference edge; edges ordered bottom, right, top, left
    def mean1(p):
        return 0.0 if p % 2 else 1.0 / (p + 1)

    if edge == 0:
        return mean1(a) * (-1.0) ** b
    if edge == 1:
        return mean1(b)
    if edge == 2:
        return mean1(a)
    return mean1(b) * (-1.0) ** a


def eq1rot_moment_matrix() -> np.ndarray:
    """Moments ``[functional j, monomial k]`` of the EQ1rot degrees of freedom.

    Functionals 0..3 are the edge means (bottom, right, top, left), functional
    4 is the cell mean.
    """
    m = np.zeros((5, 5))
    for k, (a, b) in enumerate(EQ1ROT_EXPONENTS):
        for j in range(4):
            m[j, k] = _monomial_edge_mean(a, b, j)
        m[4, k] = _monomial_edge_mean(a, 0, 2) * _monomial_edge_mean(b, 0, 2)
    return m


@dataclass(frozen=True, eq=False)
class ReferenceBasis:
    kind: ElementKind
    exponents: np.ndarray
    coeffs: np.ndarray  # (n_monomials, n_local)

    @property
    def n_local(self) -> int:
        return self.coeffs.shape[1]

    def _monomials(self, points, dx=0, dy=0):
        points = np.atleast_2d(points)
        x, y = points[:, 0:1], points[:, 1:2]
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        fa = np.ones_like(a, dtype=float)
        fb = np.ones_like(b, dtype=float)
        for k in range(dx):
            fa = fa * (a - k)
        for k in range(dy):
            fb = fb * (b - k)
        ea = np.maximum(a - dx, 0)
        eb = np.maximum(b - dy, 0)
        return fa * fb * x**ea * y**eb

    def values(self, points) -> np.ndarray:
        """Shape function values, shape (points, n_local)."""
        return self._monomials(points) @ self.coeffs

    def gradients(self, points) -> np.ndarray:
        """Reference gradients, shape (points, n_local, 2)."""
        gx = self._monomials(points, dx=1) @ self.coeffs
        gy = self._monomials(points, dy=1) @ self.coeffs
        return np.stack([gx, gy], axis=-1)

    def mixed(self, points) -> np.ndarray:
        """Reference mixed second derivative d2/dxdy, shape (points, n_local)."""
        return self._monomials(points, dx=1, dy=1) @ self.coeffs


def reference_basis(kind: ElementKind) -> ReferenceBasis:
    kind = ElementKind(kind)
    if kind is ElementKind.EQ1ROT:
        coeffs = np.linalg.inv(eq1rot_moment_matrix())
        return ReferenceBasis(kind, EQ1ROT_EXPONENTS, coeffs)
    vander = ReferenceBasis(kind, Q2_EXPONENTS, np.eye(9))._monomials(Q2_NODES)
    return ReferenceBasis(kind, Q2_EXPONENTS, np.linalg.inv(vander))


@dataclass(eq=False)
class FeSpace:
    """Finite element space on a uniform mesh.

    ``dofs[c]`` lists the global DOFs of cell ``c`` in local order.  DOFs in
    ``boundary`` are constrained to zero; the remaining ``free`` DOFs carry the
    unknowns.  ``apply_mask=False`` gives an unconstrained space (used to test
    reproduction of functions that do not vanish on the boundary).
    """

    mesh: Mesh
    kind: ElementKind
    basis: ReferenceBasis
    quad: Quadrature
    dofs: np.ndarray
    n_dofs: int
    boundary: np.ndarray
    apply_mask: bool = True

    @cached_property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        if self.apply_mask:
            mask[self.boundary] = False
        return np.flatnonzero(mask)

    @property
    def n_free(self) -> int:
        return self.free.size

    @cached_property
    def free_index(self) -> np.ndarray:
        """Global DOF -> position among free DOFs, ``-1`` for constrained DOFs."""
        idx = np.full(self.n_dofs, -1, dtype=np.int64)
        idx[self.free] = np.arange(self.n_free)
        return idx

    @property
    def jacobian(self) -> float:
        return 0.25 * self.mesh.hx * self.mesh.hy

    @property
    def grad_scale(self) -> np.ndarray:
        return np.array([2.0 / self.mesh.hx, 2.0 / self.mesh.hy])

    @cached_property
    def quad_values(self) -> np.ndarray:
        return self.basis.values(self.quad.points)

    @cached_property
    def quad_gradients(self) -> np.ndarray:
        """Physical gradients at quadrature points, shape (points, n_local, 2)."""
        return self.basis.gradients(self.quad.points) * self.grad_scale

    @cached_property
    def quad_coords(self) -> tuple[np.ndarray, np.ndarray]:
        return self.mesh.map_points(self.quad.points)

    def extend(self, free_coeffs: np.ndarray) -> np.ndarray:
        """Full coefficient vector with zeros on constrained DOFs."""
        full = np.zeros(self.n_dofs)
        full[self.free] = free_coeffs
        return full

    def local(self, free_coeffs: np.ndarray) -> np.ndarray:
        """Per-cell local coefficients, shape (cells, n_local)."""
        return self.extend(free_coeffs)[self.dofs]

    def field(self, coeffs) -> "DiscreteField":
        return DiscreteField(self, np.asarray(coeffs, dtype=float))

    def zeros(self) -> "DiscreteField":
        return DiscreteField(self, np.zeros(self.n_free))

    def unmasked(self) -> "FeSpace":
        """The same space without boundary constraints."""
        return FeSpace(
            self.mesh, self.kind, self.basis, self.quad, self.dofs, self.n_dofs,
            self.boundary, apply_mask=False,
        )


@dataclass(eq=False)
class DiscreteField:
    """Coefficients over the free DOFs of ``space``."""

    space: FeSpace
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.space.n_free,):
            raise ValueError(
                f"field has {self.coeffs.shape} coefficients, space has "
                f"{self.space.n_free} free DOFs"
            )

    def __neg__(self):
        return DiscreteField(self.space, -self.coeffs)

    def __mul__(self, c: float):
        return DiscreteField(self.space, c * self.coeffs)

    __rmul__ = __mul__


def _eq1rot_dofs(mesh: Mesh):
    cell_dofs = np.column_stack(
        [mesh.cell_faces, mesh.n_faces + np.arange(mesh.n_cells)]
    )
    return cell_dofs, mesh.n_faces + mesh.n_cells, mesh.boundary_faces


def _q2_dofs(mesh: Mesh):
    px = 2 * mesh.nx + 1
    i, j = mesh.cells[:, 0], mesh.cells[:, 1]
    cols = []
    for b in range(3):
        for a in range(3):
            cols.append((2 * j + b) * px + 2 * i + a)
    cell_dofs = np.column_stack(cols)
    n = px * (2 * mesh.ny + 1)
    nb, na = np.divmod(np.arange(n), px)
    boundary = np.flatnonzero(
        (na == 0) | (na == px - 1) | (nb == 0) | (nb == 2 * mesh.ny)
    )
    return cell_dofs, n, boundary


def build_space(
    mesh: Mesh,
    kind: ElementKind | str,
    quad_order: int = DEFAULT_QUAD_ORDER,
    basis: ReferenceBasis | None = None,
    apply_mask: bool = True,
) -> FeSpace:
    """Build the global space.  ``basis`` overrides the reference basis (debug hook)."""
    kind = ElementKind(kind)
    quad = Quadrature.gauss(quad_order)
    if kind is ElementKind.EQ1ROT:
        dofs, n, boundary = _eq1rot_dofs(mesh)
    else:
        dofs, n, boundary = _q2_dofs(mesh)
    dofs.setflags(write=False)
    return FeSpace(
        mesh, kind, basis or reference_basis(kind), quad, dofs, n, boundary,
        apply_mask=apply_mask,
    )


def eval_field(space: FeSpace, field: DiscreteField | np.ndarray, cells, ref_points):
    """Values and broken gradients of a field at reference points of given cells.

    Returns ``values`` with shape (cells, points) and ``grads`` with shape
    (cells, points, 2).
    """
    coeffs = field.coeffs if isinstance(field, DiscreteField) else np.asarray(field)
    cells = np.atleast_1d(np.asarray(cells))
    if cells.size and (cells.min() < 0 or cells.max() >= space.mesh.n_cells):
        raise ValueError("cell index out of range")
    ref_points = np.atleast_2d(ref_points)
    loc = space.local(coeffs)[cells]
    vals = loc @ space.basis.values(ref_points).T
    g = space.basis.gradients(ref_points) * space.grad_scale
    grads = np.einsum("cl,pld->cpd", loc, g)
    return vals, grads


def quad_values(space: FeSpace, coeffs: np.ndarray) -> np.ndarray:
    """Field values at every cell's quadrature points, shape (cells, points)."""
    return space.local(coeffs) @ space.quad_values.T


def quad_gradients(space: FeSpace, coeffs: np.ndarray) -> np.ndarray:
    """Broken gradients at quadrature points, shape (cells, points, 2)."""
    return np.einsum("cl,pld->cpd", space.local(coeffs), space.quad_gradients)


def integrate(space: FeSpace, values: np.ndarray) -> float:
    """Integral of data sampled at quadrature points (cells, points)."""
    return float(np.sum(values @ space.quad.weights) * space.jacobian)
