"""Vortex detection, coarse-grained densities and weak-norm comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import ContractViolation, GeometryError, ResolutionError
from .functional import PotentialSpec
from .grid import ComplexField, Grid2D, ScalarField, density, rescale_state
from .thomas_fermi import TFProfile

MAX_WINDING = 4


class VortexRecord(NamedTuple):
    x: float
    y: float
    winding: int


def _wrap(d):
    return (d + np.pi) % (2.0 * np.pi) - np.pi


def winding_map(u: np.ndarray) -> np.ndarray:
    """Counter-clockwise phase winding of every plaquette, shape ``(nx-1, ny-1)``."""
    th = np.angle(u)
    a = th[:-1, :-1]
    b = th[1:, :-1]
    c = th[1:, 1:]
    d = th[:-1, 1:]
    total = _wrap(b - a) + _wrap(c - b) + _wrap(d - c) + _wrap(a - d)
    return np.rint(total / (2.0 * np.pi)).astype(int)


def default_halo(grid: Grid2D) -> int:
    return max(1, round(min(grid.nx, grid.ny) / 64))


def detect_vortices(u: ComplexField, floor: float | None = None,
                    halo: int | None = None) -> list[VortexRecord]:
    """Plaquettes with nonzero phase winding in regions where ``|u|`` exceeds ``floor``.

    The default floor is a tenth of the median modulus.  It is compared with
    the largest modulus within ``halo`` nodes of the plaquette (default
    about 1/64 of the box), not with the corners themselves: the corners of a
    resolved core sit at ``|u| ~ h / core size``, which falls below any fixed
    floor as the grid is refined.  Plaquettes touching an exact zero (the
    Dirichlet ring) have no defined phase and are skipped.
    """
    mod = np.abs(u.values)
    if floor is None:
        floor = 0.1 * float(np.median(mod))
    if halo is None:
        halo = default_halo(u.grid)
    live = mod > 1e-12 * float(mod.max()) if mod.max() > 0 else np.zeros(mod.shape, bool)
    local = ndimage.maximum_filter(mod, size=2 * halo + 1, mode="nearest") if halo > 0 else mod
    ok = local > floor
    corners = (live[:-1, :-1] & live[1:, :-1] & live[1:, 1:] & live[:-1, 1:]
               & (ok[:-1, :-1] | ok[1:, :-1] | ok[1:, 1:] | ok[:-1, 1:]))
    w = winding_map(u.values)
    w[~corners] = 0
    w = np.clip(w, -MAX_WINDING, MAX_WINDING)
    grid = u.grid
    xs = grid.x[:-1] + 0.5 * grid.spacing[0]
    ys = grid.y[:-1] + 0.5 * grid.spacing[1]
    ii, jj = np.nonzero(w)
    return [VortexRecord(float(xs[i]), float(ys[j]), int(w[i, j])) for i, j in zip(ii, jj)]


@dataclass(frozen=True, eq=False)
class CoarseDensity:
    cell_side: float
    cells_per_side: int  # grid nodes per tile edge
    values: np.ndarray  # rho_j for every tile, row-major over tiles
    retained: np.ndarray  # boolean mask over tiles
    areas: np.ndarray
    nu: float
    mu_thr: float
    threshold: float

    @property
    def retained_mass(self) -> float:
        return float(np.sum(self.values[self.retained] * self.areas[self.retained]))

    def piecewise(self, grid: Grid2D) -> ScalarField:
        """The piecewise-constant density on the original grid."""
        k = self.cells_per_side
        vals = np.where(self.retained, self.values, 0.0)
        full = np.repeat(np.repeat(vals, k, axis=0), k, axis=1)
        return ScalarField(grid, full[: grid.nx, : grid.ny])


def check_exponents(nu: float, mu_thr: float) -> None:
    if not 0.0 < nu < 0.5:
        raise ContractViolation(f"coarse-graining exponent must satisfy 0 < ν < 1/2, got {nu}")
    if not 0.0 < mu_thr < 1.0 - 2.0 * nu:
        raise ContractViolation(
            f"threshold exponent must satisfy 0 < μ < 1 - 2ν = {1 - 2 * nu:g}, got {mu_thr}")


def coarse_grain(rho: ScalarField, beta: float, nu: float = 0.25, mu_thr: float = 0.25) -> CoarseDensity:
    """Tile the box with squares of side ``beta^-nu`` and average the density.

    Tiles are whole blocks of grid nodes (side rounded to the nearest node
    count); edge tiles may be partial and use their actual area.
    """
    check_exponents(nu, mu_thr)
    grid = rho.grid
    side = beta ** (-nu)
    h = grid.spacing[0]
    if side < 2.0 * h:
        raise ResolutionError(f"tile side {side:.3g} is below two grid spacings ({2 * h:.3g})")
    k = max(2, int(round(side / h)))
    nx, ny = grid.shape
    tx, ty = -(-nx // k), -(-ny // k)
    pad = np.zeros((tx * k, ty * k))
    pad[:nx, :ny] = rho.values
    cnt = np.zeros_like(pad)
    cnt[:nx, :ny] = 1.0
    mass = pad.reshape(tx, k, ty, k).sum(axis=(1, 3)) * grid.cell_area
    areas = cnt.reshape(tx, k, ty, k).sum(axis=(1, 3)) * grid.cell_area
    values = mass / areas
    thr = beta ** (2.0 * nu - 1.0 + mu_thr)
    return CoarseDensity(k * h, k, values, values >= thr, areas, nu, mu_thr, thr)


# --- weak (dual Lipschitz) distance ---------------------------------------

HAT_SCALES = (0.5, 0.25, 0.125)


def _dictionary(X, Y, center, R):
    """Lipschitz-1 test functions vanishing outside ``B_R(center)``.

    Radial cones of radius R, R/2, R/4 at the centre plus tensor hats
    ``h(x) h(y) / (sqrt(2) w)`` of half-width ``w = R * scale`` on a lattice
    of spacing ``w`` whose support squares fit inside the ball.  The set is
    symmetric under reflection through the centre.
    """
    cx, cy = center
    dx = X - cx
    dy = Y - cy
    r = np.hypot(dx, dy)
    for frac in (1.0, 0.5, 0.25):
        yield np.maximum(R * frac - r, 0.0)
    for scale in HAT_SCALES:
        w = R * scale
        m = int(math.floor(R / w))
        for i in range(-m, m + 1):
            for j in range(-m, m + 1):
                px, py = i * w, j * w
                if math.hypot(abs(px) + w, abs(py) + w) > R:
                    continue
                hx = np.maximum(w - np.abs(dx - px), 0.0)
                hy = np.maximum(w - np.abs(dy - py), 0.0)
                yield hx * hy / (math.sqrt(2.0) * w)


def weak_norm_distance(rho1: ScalarField, rho2: ScalarField, R: float, center=(0.0, 0.0)) -> float:
    """``max |int phi (rho1 - rho2)|`` over the fixed Lipschitz dictionary."""
    grid = rho1.grid
    if rho2.grid.shape != grid.shape:
        raise ContractViolation("densities live on different grids")
    if not grid.contains_ball(center, R):
        raise GeometryError(f"ball of radius {R:.4g} at {tuple(center)} leaves the grid")
    diff = rho1.values - rho2.values
    X, Y = grid.mesh()
    best = 0.0
    for phi in _dictionary(X, Y, center, R):
        best = max(best, abs(float(np.sum(phi * diff))) * grid.cell_area)
    return best


class BallDistance(NamedTuple):
    cx: float
    cy: float
    radius: float
    distance: float


class LDAReport(NamedTuple):
    beta: float
    balls: list
    max_distance: float
    support_radius: float  # measured on the rescaled minimiser density
    tf_support_radius: float  # R0 of rho^TF_1

    @property
    def support_ratio(self) -> float:
        return self.support_radius / self.tf_support_radius


def support_radius(rho: ScalarField, rel_floor: float = 1e-2) -> float:
    """Largest distance from the origin at which ``rho`` exceeds ``rel_floor * max``."""
    X, Y = rho.grid.mesh()
    sel = rho.values > rel_floor * float(rho.values.max())
    return float(np.hypot(X[sel], Y[sel]).max())


def rescaled_density(u: ComplexField, beta: float, s: float) -> ScalarField:
    """``beta^(2/(s+2)) |u(beta^(1/(s+2)) r)|^2`` on the correspondingly shrunk grid."""
    e = 1.0 / (s + 2.0)
    return density(rescale_state(u, beta**e, beta ** (-e)))


def lda_balls(R0: float) -> list[tuple[tuple[float, float], float]]:
    """A centre ball of radius 1.25 R0 and eight satellites of radius R0/2."""
    out = [((0.0, 0.0), 1.25 * R0)]
    for k in range(8):
        a = k * math.pi / 4.0
        out.append(((0.6 * R0 * math.cos(a), 0.6 * R0 * math.sin(a)), 0.5 * R0))
    return out


def lda_compare(u: ComplexField, beta: float, V: PotentialSpec, tf: TFProfile) -> LDAReport:
    """Weak-norm distance between the rescaled minimiser density and rho^TF_1."""
    s = V.s
    R0 = tf.support_radius
    grid = u.grid
    reach = R0 * beta ** (1.0 / (s + 2.0))
    if not grid.contains_ball((0.0, 0.0), reach):
        raise GeometryError(f"TF support radius {reach:.4g} exceeds the computational box")
    scaled = rescaled_density(u, beta, s)
    g = scaled.grid
    tf_vals = ScalarField(g, tf.density(*g.mesh()))
    balls = []
    for center, radius in lda_balls(R0):
        if not g.contains_ball(center, radius):
            raise GeometryError("comparison ball leaves the rescaled box")
        balls.append(BallDistance(center[0], center[1], radius,
                                  weak_norm_distance(scaled, tf_vals, radius, center)))
    return LDAReport(beta, balls, max(b.distance for b in balls), support_radius(scaled), R0)
