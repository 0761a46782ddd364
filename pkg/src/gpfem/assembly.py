"""Global sparse forms on the free DOFs of a space.

Every matrix of a space is assembled into one symbolic pattern.  Element
contributions are accumulated with ``np.bincount`` in cell order, so the
floating point result does not depend on anything but the inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .elements import DiscreteField, FeSpace, quad_values


@dataclass(frozen=True)
class Potential:
    """Trapping potential ``V(x, y) >= 0``.

    Use the preset constructors or wrap any vectorized callable.
    """

    name: str
    func: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(compare=False)

    def __call__(self, x, y):
        return np.broadcast_to(self.func(x, y), np.shape(x))

    @classmethod
    def zero(cls):
        return cls("ZERO", lambda x, y: np.zeros_like(x))

    @classmethod
    def constant(cls, c: float):
        return cls(f"CONSTANT({c})", lambda x, y: np.full_like(x, c, dtype=float))

    @classmethod
    def harmonic_aniso(cls, gx: float = 16.0, gy: float = 1.0):
        return cls("HARMONIC_ANISO", lambda x, y: gx * x**2 + gy * y**2)

    @classmethod
    def sin_well(cls):
        def v(x, y):
            s = np.sin(0.5 * np.pi * (x + 1)) * np.sin(0.5 * np.pi * (y + 1))
            return 1.0 - s**2

        return cls("SIN_WELL", v)

    @classmethod
    def harmonic_stirrer(cls, amplitude: float = 8.0, x0: float = 1.0, y0: float = 0.0):
        def v(x, y):
            return x**2 + y**2 + amplitude * np.exp(-((x - x0) ** 2) - (y - y0) ** 2)

        return cls("HARMONIC_STIRRER", v)

    @property
    def is_zero(self) -> bool:
        return self.name == "ZERO"


PRESETS = {
    "ZERO": Potential.zero,
    "HARMONIC_ANISO": Potential.harmonic_aniso,
    "SIN_WELL": Potential.sin_well,
    "HARMONIC_STIRRER": Potential.harmonic_stirrer,
}


def potential_preset(name: str, **params) -> Potential:
    try:
        return PRESETS[name.upper()](**params)
    except KeyError:
        raise ValueError(f"unknown potential preset {name!r}") from None


class SparsityPattern:
    """CSR pattern of a space restricted to its free DOFs."""

    def __init__(self, space: FeSpace):
        n = space.n_free
        fi = space.free_index[space.dofs]  # (cells, nl)
        nl = fi.shape[1]
        rows = np.repeat(fi, nl, axis=1).ravel()
        cols = np.tile(fi, (1, nl)).ravel()
        keep = (rows >= 0) & (cols >= 0)
        keys = rows[keep] * n + cols[keep]
        uniq, inverse = np.unique(keys, return_inverse=True)
        self.n = n
        self.keep = keep
        self.slots = inverse.astype(np.int64)
        r = uniq // n
        self.indices = (uniq % n).astype(np.int32)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=n), out=self.indptr[1:])
        self.nnz = uniq.size

    def assemble(self, local: np.ndarray) -> sp.csr_matrix:
        """Accumulate element matrices (cells, nl, nl) into a CSR matrix."""
        data = np.bincount(
            self.slots, weights=local.reshape(-1)[self.keep], minlength=self.nnz
        )
        return sp.csr_matrix(
            (data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n)
        )


def pattern(space: FeSpace) -> SparsityPattern:
    cache = space.__dict__
    if "_pattern" not in cache:
        cache["_pattern"] = SparsityPattern(space)
    return cache["_pattern"]


def _broadcast(space: FeSpace, loc: np.ndarray) -> np.ndarray:
    return np.broadcast_to(loc, (space.mesh.n_cells,) + loc.shape)


def _weighted_mass(space: FeSpace, weight_q: np.ndarray) -> sp.csr_matrix:
    # weight_q: (cells, points) weight samples at quadrature points
    phi = space.quad_values
    nl = phi.shape[1]
    outer = (phi[:, :, None] * phi[:, None, :]).reshape(len(phi), nl * nl)
    w = weight_q * (space.quad.weights * space.jacobian)
    loc = (w @ outer).reshape(-1, nl, nl)
    return pattern(space).assemble(loc)


def local_stiffness(space: FeSpace) -> np.ndarray:
    g = space.quad_gradients
    return np.einsum("q,qid,qjd->ij", space.quad.weights, g, g) * space.jacobian


def local_mass(space: FeSpace) -> np.ndarray:
    phi = space.quad_values
    return np.einsum("q,qi,qj->ij", space.quad.weights, phi, phi) * space.jacobian


def assemble_stiffness(space: FeSpace) -> sp.csr_matrix:
    return pattern(space).assemble(_broadcast(space, local_stiffness(space)))


def assemble_mass(space: FeSpace) -> sp.csr_matrix:
    return pattern(space).assemble(_broadcast(space, local_mass(space)))


def assemble_potential(space: FeSpace, V: Potential) -> sp.csr_matrix:
    x, y = space.quad_coords
    if V.is_zero:
        return _weighted_mass(space, np.zeros_like(x))
    return _weighted_mass(space, V(x, y))


def assemble_density(space: FeSpace, w: DiscreteField) -> sp.csr_matrix:
    """Mass matrix weighted by ``w^2``; the caller applies the factor ``beta``."""
    if w.space is not space:
        raise ValueError("field does not belong to this space")
    return _weighted_mass(space, quad_values(space, w.coeffs) ** 2)


def load_vector(space: FeSpace, f=None) -> np.ndarray:
    """``(f, phi_i)`` for free DOFs; ``f=None`` integrates the shape functions."""
    phi = space.quad_values
    if f is None:
        vals = np.ones((space.mesh.n_cells, phi.shape[0]))
    else:
        vals = f(*space.quad_coords)
    loc = (vals * (space.quad.weights * space.jacobian)) @ phi
    full = np.bincount(space.dofs.ravel(), weights=loc.ravel(), minlength=space.n_dofs)
    return full[space.free]
