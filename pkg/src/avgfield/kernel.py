"""Self-generated magnetic potential ``A[rho] = grad_perp(log|r|) * rho``.

The convolution is done in free space: the density is zero-padded to at
least ``2n - 1`` nodes per axis so the FFT product is a linear (not circular)
convolution.  The kernel ``(-y, x) / |r|^2`` is tabulated at node offsets with
the singular offset set to zero.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import ContractViolation, ResourceError, SingularityError
from .grid import Grid2D, ScalarField, VectorField, grad_arrays

# padded arrays above this many nodes are refused
MAX_PADDED_NODES = 1 << 26


@dataclass(frozen=True, eq=False)
class KernelTable:
    grid: Grid2D
    padded: tuple[int, int]
    kx: np.ndarray  # tabulated -y/|r|^2 in wrap-around order
    ky: np.ndarray  # tabulated  x/|r|^2
    kx_hat: np.ndarray
    ky_hat: np.ndarray

    def value(self, di: int, dj: int) -> tuple[float, float]:
        """Kernel value at node offset ``(di, dj)``."""
        px, py = self.padded
        return float(self.kx[di % px, dj % py]), float(self.ky[di % px, dj % py])


def _padded_len(n):
    return sfft.next_fast_len(2 * n, real=True)


@functools.lru_cache(maxsize=16)
def build_kernel(grid: Grid2D) -> KernelTable:
    px, py = _padded_len(grid.nx), _padded_len(grid.ny)
    if px * py > MAX_PADDED_NODES:
        raise ResourceError(f"padded kernel {px}x{py} exceeds the allocation limit")
    hx, hy = grid.spacing
    # signed offsets in FFT order; offsets beyond n-1 never meet the data
    ox = np.fft.fftfreq(px, 1.0 / px).astype(np.int64)
    oy = np.fft.fftfreq(py, 1.0 / py).astype(np.int64)
    X, Y = np.meshgrid(ox * hx, oy * hy, indexing="ij")
    r2 = X * X + Y * Y
    with np.errstate(divide="ignore", invalid="ignore"):
        kx = -Y / r2
        ky = X / r2
    kx[0, 0] = ky[0, 0] = 0.0
    far = (np.abs(ox) >= grid.nx)[:, None] | (np.abs(oy) >= grid.ny)[None, :]
    kx[far] = 0.0
    ky[far] = 0.0
    for a in (kx, ky):
        a.flags.writeable = False
    kx_hat = sfft.rfft2(kx)
    ky_hat = sfft.rfft2(ky)
    kx_hat.flags.writeable = False
    ky_hat.flags.writeable = False
    return KernelTable(grid, (px, py), kx, ky, kx_hat, ky_hat)


def _check(grid, k):
    if grid.shape != k.grid.shape or grid.spacing != k.grid.spacing:
        raise ContractViolation("density grid does not match kernel grid")


def potential_arrays(rho: np.ndarray, k: KernelTable) -> tuple[np.ndarray, np.ndarray]:
    nx, ny = k.grid.shape
    rho_hat = sfft.rfft2(rho, s=k.padded)
    area = k.grid.cell_area
    ax = sfft.irfft2(rho_hat * k.kx_hat, s=k.padded)[:nx, :ny] * area
    ay = sfft.irfft2(rho_hat * k.ky_hat, s=k.padded)[:nx, :ny] * area
    return ax, ay


def potential_adjoint(vx: np.ndarray, vy: np.ndarray, k: KernelTable) -> np.ndarray:
    """Adjoint of ``rho -> A[rho]`` applied to a vector field.

    Because the kernel is odd this is ``-(K * v)`` summed over components,
    i.e. ``-grad_perp(w0) * v`` in continuum notation.
    """
    nx, ny = k.grid.shape
    s = sfft.rfft2(vx, s=k.padded) * k.kx_hat + sfft.rfft2(vy, s=k.padded) * k.ky_hat
    return -sfft.irfft2(s, s=k.padded)[:nx, :ny] * k.grid.cell_area


def vector_potential(rho: ScalarField, k: KernelTable) -> VectorField:
    _check(rho.grid, k)
    ax, ay = potential_arrays(rho.values, k)
    return VectorField(rho.grid, ax, ay)


def curl(a: VectorField) -> ScalarField:
    _, dy_ax = grad_arrays(a.x, a.grid)
    dx_ay, _ = grad_arrays(a.y, a.grid)
    return ScalarField(a.grid, dx_ay - dy_ax)


def exterior_field(mass: float, center, query) -> np.ndarray:
    """Field of a radial density of total ``mass`` outside its support."""
    dx = query[0] - center[0]
    dy = query[1] - center[1]
    r2 = dx * dx + dy * dy
    if r2 == 0:
        raise SingularityError("query point coincides with the centre")
    return mass * np.array([-dy, dx]) / r2
