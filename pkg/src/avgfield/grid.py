"""Uniform rectangular grids and the discrete fields that live on them.

Nodes are cell centres: node ``(i, j)`` sits at
``origin + ((i + 1/2) hx, (j + 1/2) hy)``.  Arrays are indexed ``[i, j]``
with ``i`` along x, so a field on an ``nx x ny`` grid has shape ``(nx, ny)``.

Every integral is the plain cell-centred Riemann sum ``sum(f) * hx * hy``.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DegenerateStateError

MIN_NODES = 8


class BC(enum.IntEnum):
    """Boundary condition tag; the integer values are the snapshot tags."""

    DIRICHLET = 0
    NEUMANN = 1
    FREE = 2

    @classmethod
    def parse(cls, value) -> "BC":
        if isinstance(value, BC):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ConfigurationError(f"unknown boundary condition {value!r}", key="bc")
        return cls(int(value))


@dataclass(frozen=True)
class Grid2D:
    origin: tuple[float, float]
    spacing: tuple[float, float]
    size: tuple[int, int]
    bc: BC = BC.NEUMANN

    def __post_init__(self):
        nx, ny = self.size
        if nx < MIN_NODES or ny < MIN_NODES:
            raise ConfigurationError(f"grid needs at least {MIN_NODES} nodes per axis, got {self.size}", key="n")
        if not (self.spacing[0] > 0 and self.spacing[1] > 0):
            raise ConfigurationError(f"spacing must be positive, got {self.spacing}", key="extent")

    @property
    def nx(self) -> int:
        return self.size[0]

    @property
    def ny(self) -> int:
        return self.size[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.size[0], self.size[1])

    @property
    def extent(self) -> tuple[float, float]:
        return (self.spacing[0] * self.nx, self.spacing[1] * self.ny)

    @property
    def cell_area(self) -> float:
        return self.spacing[0] * self.spacing[1]

    @property
    def area(self) -> float:
        return self.cell_area * self.nx * self.ny

    @property
    def x(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.nx) + 0.5) * self.spacing[0]

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.ny) + 0.5) * self.spacing[1]

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def mask(self) -> np.ndarray | None:
        """Boolean ring of boundary nodes held at zero, or None if not Dirichlet."""
        if self.bc != BC.DIRICHLET:
            return None
        return _boundary_ring(self.nx, self.ny)

    def with_bc(self, bc) -> "Grid2D":
        return Grid2D(self.origin, self.spacing, self.size, BC.parse(bc))

    def dilate(self, factor: float) -> "Grid2D":
        """The grid of ``factor * Omega``: same node count, everything scaled."""
        return Grid2D(
            (self.origin[0] * factor, self.origin[1] * factor),
            (self.spacing[0] * factor, self.spacing[1] * factor),
            self.size,
            self.bc,
        )

    def contains_ball(self, center, radius) -> bool:
        x0, y0 = self.origin
        lx, ly = self.extent
        cx, cy = center
        return (cx - radius >= x0 and cx + radius <= x0 + lx
                and cy - radius >= y0 and cy + radius <= y0 + ly)


@functools.lru_cache(maxsize=32)
def _boundary_ring(nx, ny):
    m = np.zeros((nx, ny), dtype=bool)
    m[0, :] = m[-1, :] = True
    m[:, 0] = m[:, -1] = True
    m.flags.writeable = False
    return m


def make_grid(extent, n, bc=BC.NEUMANN, origin=None, centered=False) -> Grid2D:
    """Uniform grid covering a rectangle of the given extent.

    The rectangle starts at ``origin`` (default ``(0, 0)``), or is centred on
    the coordinate origin when ``centered`` is set.
    """
    lx, ly = (float(e) for e in extent)
    nx, ny = (int(c) for c in n)
    if not (lx > 0 and ly > 0):
        raise ConfigurationError(f"extent must be positive, got {extent}", key="extent")
    if nx < MIN_NODES or ny < MIN_NODES:
        raise ConfigurationError(f"grid needs at least {MIN_NODES} nodes per axis, got {n}", key="n")
    if centered:
        origin = (-lx / 2, -ly / 2)
    elif origin is None:
        origin = (0.0, 0.0)
    return Grid2D((float(origin[0]), float(origin[1])), (lx / nx, ly / ny), (nx, ny), BC.parse(bc))


def _frozen(values, dtype):
    arr = np.asarray(values, dtype=dtype)
    if arr.flags.writeable:
        arr = arr.copy()
        arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, np.float64))
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, np.complex128))
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")

    @property
    def norm(self) -> float:
        return lp_norm(self, 2)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid2D
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x, np.float64))
        object.__setattr__(self, "y", _frozen(self.y, np.float64))
        if self.x.shape != self.grid.shape or self.y.shape != self.grid.shape:
            raise ConfigurationError("vector components do not match grid shape")


# --- difference stencils -------------------------------------------------


@functools.lru_cache(maxsize=64)
def _diff_matrix(n: int, h: float, bc: BC) -> sp.csr_matrix:
    """1D centred first-derivative matrix with the boundary closure for ``bc``."""
    main = np.zeros(n)
    upper = np.full(n - 1, 1.0)
    lower = np.full(n - 1, -1.0)
    d = sp.diags([lower, main, upper], [-1, 0, 1], format="lil")
    if bc == BC.NEUMANN:
        # mirrored ghost u[-1] = u[0], u[n] = u[n-1]
        d[0, 0] = -1.0
        d[n - 1, n - 1] = 1.0
    elif bc == BC.FREE:
        d[0, 0], d[0, 1], d[0, 2] = -3.0, 4.0, -1.0
        d[n - 1, n - 3], d[n - 1, n - 2], d[n - 1, n - 1] = 1.0, -4.0, 3.0
    # Dirichlet: zero ghost values, nothing to add
    return (d.tocsr() / (2.0 * h)).tocsr()


def _apply_x(mat, arr):
    return mat @ arr


def _apply_y(mat, arr):
    return (mat @ arr.T).T


def grad_arrays(u: np.ndarray, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    dx = _diff_matrix(grid.nx, grid.spacing[0], grid.bc)
    dy = _diff_matrix(grid.ny, grid.spacing[1], grid.bc)
    return _apply_x(dx, u), _apply_y(dy, u)


def grad_adjoint(vx: np.ndarray, vy: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Transpose of :func:`grad_arrays`: ``Dx^T vx + Dy^T vy``."""
    dx = _diff_matrix(grid.nx, grid.spacing[0], grid.bc)
    dy = _diff_matrix(grid.ny, grid.spacing[1], grid.bc)
    return _apply_x(dx.T, vx) + _apply_y(dy.T, vy)


def integrate(values: np.ndarray, grid: Grid2D) -> float:
    return float(np.sum(values) * grid.cell_area)


# --- public operations ---------------------------------------------------


def _values(f):
    return f.values if hasattr(f, "values") else np.asarray(f)


def lp_norm(f, p: float, grid: Grid2D | None = None) -> float:
    grid = grid or f.grid
    p = float(p)
    if not np.isfinite(p) or p < 1:
        raise ConfigurationError(f"p must be finite and >= 1, got {p}", key="p")
    a = np.abs(_values(f))
    if p == 2.0:
        s = np.sum(a * a)
    else:
        s = np.sum(a**p)
    return float((s * grid.cell_area) ** (1.0 / p))


def normalize(u: ComplexField) -> ComplexField:
    nrm = lp_norm(u, 2)
    if not nrm > 0:
        raise DegenerateStateError("cannot normalize a zero field")
    return ComplexField(u.grid, u.values / nrm)


def gradient(u: ComplexField) -> tuple[ComplexField, ComplexField]:
    gx, gy = grad_arrays(u.values, u.grid)
    return ComplexField(u.grid, gx), ComplexField(u.grid, gy)


def density(u: ComplexField) -> ScalarField:
    v = u.values
    return ScalarField(u.grid, v.real**2 + v.imag**2)


def current_arrays(u: np.ndarray, gx: np.ndarray, gy: np.ndarray):
    # (i/2)(u grad u* - u* grad u) == Im(conj(u) grad u)
    uc = np.conj(u)
    return (uc * gx).imag, (uc * gy).imag


def current(u: ComplexField) -> VectorField:
    gx, gy = grad_arrays(u.values, u.grid)
    jx, jy = current_arrays(u.values, gx, gy)
    return VectorField(u.grid, jx, jy)


def rescale_state(u: ComplexField, lam: float, mu: float) -> ComplexField:
    """``lam * u(r / mu)`` on the dilated grid; node values are copied."""
    if not (lam > 0 and mu > 0):
        raise ConfigurationError("rescale factors must be positive")
    return ComplexField(u.grid.dilate(mu), lam * u.values)
