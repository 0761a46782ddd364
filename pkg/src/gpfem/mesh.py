"""Uniform tensor-product rectangle meshes.

Cells are numbered row-major, ``cell = j * nx + i``. Faces are numbered with
all horizontal faces first (row-major over ``(i, j)`` with ``j = 0..ny``),
followed by all vertical faces (column-major over ``(i, j)`` with
``i = 0..nx``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HORIZONTAL = 0
VERTICAL = 1


@dataclass(frozen=True)
class Domain:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"degenerate domain {self}")

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    @classmethod
    def square(cls, a: float, b: float) -> "Domain":
        return cls(a, b, a, b)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable uniform mesh of ``domain`` with ``nx * ny`` cells.

    ``face_cells[f]`` holds the adjacent cells of face ``f``; the second entry
    is ``-1`` on the boundary.  For interior faces the first cell is the one
    below (horizontal face) or to the left (vertical face), so its outward
    normal on the face is ``+y`` or ``+x``.
    """

    domain: Domain
    nx: int
    ny: int
    cells: np.ndarray = field(repr=False)
    face_orientation: np.ndarray = field(repr=False)
    face_cells: np.ndarray = field(repr=False)
    cell_faces: np.ndarray = field(repr=False)

    @property
    def hx(self) -> float:
        return (self.domain.xmax - self.domain.xmin) / self.nx

    @property
    def hy(self) -> float:
        return (self.domain.ymax - self.domain.ymin) / self.ny

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def n_horizontal(self) -> int:
        return self.nx * (self.ny + 1)

    @property
    def n_faces(self) -> int:
        return self.nx * (self.ny + 1) + self.ny * (self.nx + 1)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] < 0)

    def cell_centers(self) -> np.ndarray:
        d = self.domain
        i, j = self.cells[:, 0], self.cells[:, 1]
        return np.column_stack(
            [d.xmin + (i + 0.5) * self.hx, d.ymin + (j + 0.5) * self.hy]
        )

    def face_geometry(self):
        """Return ``(midpoints, lengths)`` of all faces."""
        d = self.domain
        mids = np.empty((self.n_faces, 2))
        nh = self.n_horizontal
        jh, ih = np.divmod(np.arange(nh), self.nx)
        mids[:nh, 0] = d.xmin + (ih + 0.5) * self.hx
        mids[:nh, 1] = d.ymin + jh * self.hy
        iv, jv = np.divmod(np.arange(self.n_faces - nh), self.ny)
        mids[nh:, 0] = d.xmin + iv * self.hx
        mids[nh:, 1] = d.ymin + (jv + 0.5) * self.hy
        lengths = np.where(self.face_orientation == HORIZONTAL, self.hx, self.hy)
        return mids, lengths

    def locate(self, x: np.ndarray, y: np.ndarray):
        """Cell ids and reference coordinates in ``[-1, 1]^2`` of physical points."""
        d = self.domain
        sx = (np.asarray(x, dtype=float) - d.xmin) / self.hx
        sy = (np.asarray(y, dtype=float) - d.ymin) / self.hy
        i = np.clip(np.floor(sx).astype(np.int64), 0, self.nx - 1)
        j = np.clip(np.floor(sy).astype(np.int64), 0, self.ny - 1)
        xi = 2.0 * (sx - i) - 1.0
        eta = 2.0 * (sy - j) - 1.0
        return j * self.nx + i, xi, eta

    def map_points(self, ref: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Physical coordinates ``(x, y)`` of reference points, shape (cells, points)."""
        c = self.cell_centers()
        x = c[:, :1] + 0.5 * self.hx * ref[None, :, 0]
        y = c[:, 1:] + 0.5 * self.hy * ref[None, :, 1]
        return x, y


def build_mesh(domain: Domain, nx: int, ny: int) -> Mesh:
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive integers, got ({nx}, {ny})")
    nx, ny = int(nx), int(ny)
    jj, ii = np.divmod(np.arange(nx * ny), nx)
    cells = np.column_stack([ii, jj])

    nh = nx * (ny + 1)
    nv = ny * (nx + 1)
    orientation = np.concatenate(
        [np.full(nh, HORIZONTAL, dtype=np.int8), np.full(nv, VERTICAL, dtype=np.int8)]
    )
    face_cells = np.full((nh + nv, 2), -1, dtype=np.int64)

    # horizontal face (i, j) sits between cell (i, j-1) below and (i, j) above
    jf, if_ = np.divmod(np.arange(nh), nx)
    below = np.where(jf > 0, (jf - 1) * nx + if_, -1)
    above = np.where(jf < ny, jf * nx + if_, -1)
    face_cells[:nh, 0] = np.where(below >= 0, below, above)
    face_cells[:nh, 1] = np.where(below >= 0, above, -1)

    # vertical face (i, j) sits between cell (i-1, j) left and (i, j) right
    iv, jv = np.divmod(np.arange(nv), ny)
    left = np.where(iv > 0, jv * nx + iv - 1, -1)
    right = np.where(iv < nx, jv * nx + iv, -1)
    face_cells[nh:, 0] = np.where(left >= 0, left, right)
    face_cells[nh:, 1] = np.where(left >= 0, right, -1)

    # local face order per cell: bottom, right, top, left
    cell_faces = np.column_stack(
        [
            jj * nx + ii,
            nh + (ii + 1) * ny + jj,
            (jj + 1) * nx + ii,
            nh + ii * ny + jj,
        ]
    ).astype(np.int64)

    for arr in (cells, orientation, face_cells, cell_faces):
        arr.setflags(write=False)
    return Mesh(domain, nx, ny, cells, orientation, face_cells, cell_faces)


def refine_map(coarse: Mesh, fine: Mesh) -> np.ndarray:
    """For each fine cell, the id of the coarse cell containing it."""
    if coarse.domain != fine.domain:
        raise ValueError("meshes cover different domains")
    if fine.nx % coarse.nx or fine.ny % coarse.ny:
        raise ValueError(
            f"mesh {fine.nx}x{fine.ny} is not a refinement of {coarse.nx}x{coarse.ny}"
        )
    rx, ry = fine.nx // coarse.nx, fine.ny // coarse.ny
    i, j = fine.cells[:, 0] // rx, fine.cells[:, 1] // ry
    return j * coarse.nx + i
