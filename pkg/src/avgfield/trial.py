"""Vortex-lattice trial states and the exact energy factorisation they obey.

Each of ``N = floor(beta)`` disjoint balls carries a bump of mass ``1/beta``
and every other ball contributes a phase factor ``exp(-i arg(r - r_k))``.
Outside a ball the bump's self-generated field equals the gradient of that
phase (Newton's theorem), so the energy splits into ``N`` identical
single-ball energies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from .errors import GeometryError
from .functional import ZERO, Functional, energy
from .grid import BC, ComplexField, Grid2D, make_grid, normalize


@dataclass(frozen=True)
class RadialProfile:
    """Radial function supported in the unit ball with unit L2 norm."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    support_radius: float = 1.0
    name: str = "custom"

    def __call__(self, r):
        return self.evaluator(np.asarray(r, dtype=float))


def _bump_shape(r):
    return np.where(r < 1.0, (1.0 - r * r) ** 2, 0.0)


def bump_constant() -> float:
    mass, _ = integrate.quad(lambda r: (1.0 - r * r) ** 4 * 2.0 * math.pi * r, 0.0, 1.0,
                             epsabs=0.0, epsrel=1e-13)
    return 1.0 / math.sqrt(mass)


def bump_profile() -> RadialProfile:
    """``c (1 - r^2)^2`` on the unit ball, ``c`` fixed by quadrature."""
    c = bump_constant()
    return RadialProfile(lambda r: c * _bump_shape(r), 1.0, "quartic-bump")


def default_radius(beta: float) -> float:
    return 1.0 / math.sqrt(beta)


def square_lattice(grid: Grid2D, count: int, radius: float) -> np.ndarray:
    """Centres of ``count`` balls on a square lattice of ``ceil(sqrt(count))`` per side.

    Raises :class:`GeometryError` when balls of ``radius`` would overlap or
    leave the rectangle.
    """
    m = math.ceil(math.sqrt(count))
    lx, ly = grid.extent
    sx, sy = lx / m, ly / m
    if min(sx, sy) < 2.0 * radius * (1.0 - 1e-9):
        raise GeometryError(
            f"{count} balls of radius {radius:.4g} do not fit on a {m}x{m} lattice "
            f"in a {lx:.4g}x{ly:.4g} box"
        )
    idx = np.arange(count)
    cx = grid.origin[0] + (idx % m + 0.5) * sx
    cy = grid.origin[1] + (idx // m + 0.5) * sy
    return np.column_stack([cx, cy])


def lattice_phase(grid: Grid2D, centers: np.ndarray) -> np.ndarray:
    """``sum_k arg(r - r_k)``, one arctangent per centre."""
    X, Y = grid.mesh()
    phase = np.zeros(grid.shape)
    for cx, cy in centers:
        phase += np.arctan2(Y - cy, X - cx)
    return phase


class TrialState(NamedTuple):
    field: ComplexField
    centers: np.ndarray
    radius: float
    beta: float


def vortex_lattice_trial(grid: Grid2D, beta: float, f: RadialProfile | None = None,
                         radius: float | None = None) -> TrialState:
    """Build ``sum_j u_j(r) exp(-i sum_{k != j} arg(r - r_k))``.

    ``u_j(r) = f(|r - r_j| / radius) / (radius sqrt(beta))`` so every ball holds
    mass ``1/beta``; the default radius ``1/sqrt(beta)`` gives
    ``u_j(r) = f(sqrt(beta)(r - r_j))``.
    """
    f = f or bump_profile()
    n = max(1, int(math.floor(beta)))
    radius = default_radius(beta) if radius is None else float(radius)
    centers = square_lattice(grid, n, radius)
    X, Y = grid.mesh()
    total = lattice_phase(grid, centers)
    amp = 1.0 / (radius * math.sqrt(beta))
    u = np.zeros(grid.shape, dtype=complex)
    for cx, cy in centers:
        dist = np.hypot(X - cx, Y - cy) / radius
        inside = dist < f.support_radius
        own = np.arctan2(Y[inside] - cy, X[inside] - cx)
        u[inside] += amp * f(dist[inside]) * np.exp(-1j * (total[inside] - own))
    if grid.mask is not None:
        u[grid.mask] = 0.0
    return TrialState(normalize(ComplexField(grid, u)), centers, radius, beta)


def trial_grid(beta: float, cells_per_ball: int = 64, radius: float | None = None,
               bc=BC.FREE) -> Grid2D:
    """Smallest square grid holding the trial lattice with touching balls."""
    n = max(1, int(math.floor(beta)))
    radius = default_radius(beta) if radius is None else radius
    m = math.ceil(math.sqrt(n))
    side = 2.0 * radius * m
    return make_grid((side, side), (cells_per_ball * m, cells_per_ball * m), bc)


def ball_energy(f: RadialProfile, spacing: float, beta: float = 1.0) -> float:
    """Energy of ``f`` on the unit ball at the given node spacing (ball units)."""
    n = 2 * math.ceil((1.0 + 2.0 * spacing) / spacing)
    grid = make_grid((n * spacing, n * spacing), (n, n), BC.FREE, centered=True)
    X, Y = grid.mesh()
    u = normalize(ComplexField(grid, f(np.hypot(X, Y)).astype(complex)))
    return energy(u, beta, ZERO).total


class Factorization(NamedTuple):
    lhs: float
    rhs: float

    @property
    def rel_error(self) -> float:
        return abs(self.lhs - self.rhs) / abs(self.rhs)


def factorization_check(trial: TrialState, f: RadialProfile | None = None) -> Factorization:
    """Trial energy against ``N E_{1,B1}[f] / (beta radius^2)``.

    For the default radius this is ``floor(beta) * E_{1,B1}[f]``.  The
    single-ball energy is evaluated on a grid whose spacing matches the trial
    grid in ball units.
    """
    f = f or bump_profile()
    u = trial.field
    n = len(trial.centers)
    lhs = energy(u, trial.beta, ZERO).total
    h = u.grid.spacing[0] / trial.radius
    e1 = ball_energy(f, h)
    rhs = n * e1 / (trial.beta * trial.radius**2)
    return Factorization(lhs, rhs)


class BallReport(NamedTuple):
    index: int
    cx: float
    cy: float
    mass: float
    energy: float


def per_ball(trial: TrialState) -> list[BallReport]:
    """Mass and kinetic-magnetic energy attributed to each ball (nearest centre)."""
    u = trial.field
    grid = u.grid
    fn = Functional(grid, trial.beta)
    t = fn.terms(u.values)
    dens = fn.node_density(t)
    X, Y = grid.mesh()
    d2 = [(X - cx) ** 2 + (Y - cy) ** 2 for cx, cy in trial.centers]
    owner = np.argmin(np.stack(d2), axis=0)
    out = []
    for i, (cx, cy) in enumerate(trial.centers):
        sel = owner == i
        out.append(BallReport(i, float(cx), float(cy),
                              float(np.sum(t.rho[sel])) * grid.cell_area,
                              float(np.sum(dens[sel])) * grid.cell_area))
    return out
