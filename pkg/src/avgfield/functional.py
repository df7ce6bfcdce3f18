"""The average-field energy, its Euler-Lagrange operator and related identities.

The kinetic-magnetic integrand lives on the links of the grid and is
assembled in expanded form

    |(-i D + beta A) u|^2 = |D u|^2 + 2 beta A.j + beta^2 |A|^2 |u|^2,

with ``D`` the nearest-neighbour difference across a link, ``u`` and ``A``
averaged to the link midpoint and ``j = Im(u* D u)``.  The expansion is an
exact identity of the discrete functional, and :func:`el_apply` is the exact
gradient of that functional (not a discretisation of the continuum one).

The centred node stencil used by :func:`avgfield.grid.gradient` is not used
here: it splits the grid into four sublattices that the kinetic term never
couples, while the current term does, and minimisation exploits the gap.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, ContractViolation
from .grid import (
    BC,
    ComplexField,
    Grid2D,
)
from .kernel import KernelTable, build_kernel, potential_adjoint, potential_arrays

log = logging.getLogger(__name__)

DEBUG_CROSSCHECK = False


@dataclass(frozen=True)
class PotentialSpec:
    """Trapping potential.

    ``zero``: V = 0 (homogeneous gas on a bounded box).
    ``harmonic``: V = a x^2 + b y^2.
    ``power``: V = a |r|^s.
    """

    kind: str = "zero"
    a: float = 1.0
    b: float = 1.0
    s: float = 2.0

    def __post_init__(self):
        if self.kind not in ("zero", "harmonic", "power"):
            raise ConfigurationError(f"unknown potential kind {self.kind!r}", key="potential")
        if self.kind == "harmonic":
            object.__setattr__(self, "s", 2.0)
        if self.kind != "zero":
            if not (self.a > 0 and self.b > 0):
                raise ConfigurationError("potential coefficients must be positive", key="potential")
            if not self.s > 1:
                raise ConfigurationError("potential degree must exceed 1", key="potential")

    @classmethod
    def parse(cls, text: str) -> "PotentialSpec":
        """Parse ``none``, ``harmonic:a,b`` or ``power:s``."""
        text = (text or "none").strip().lower()
        name, _, args = text.partition(":")
        try:
            if name in ("none", "zero"):
                return cls("zero")
            if name == "harmonic":
                a, b = (float(v) for v in args.split(",")) if args else (1.0, 1.0)
                return cls("harmonic", a, b)
            if name == "power":
                return cls("power", s=float(args) if args else 2.0)
        except ValueError:
            pass
        raise ConfigurationError(f"cannot parse potential {text!r}", key="potential")

    def __str__(self):
        if self.kind == "zero":
            return "none"
        if self.kind == "harmonic":
            return f"harmonic:{self.a:g},{self.b:g}"
        return f"power:{self.s:g}"

    @property
    def degree(self) -> float:
        return math.inf if self.kind == "zero" else self.s

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "zero":
            return np.zeros(np.broadcast(x, y).shape)
        if self.kind == "harmonic":
            return self.a * x * x + self.b * y * y
        return self.a * np.hypot(x, y) ** self.s

    def angular(self, theta):
        """V on the unit circle, the whole shape of a homogeneous potential."""
        return self(np.cos(theta), np.sin(theta))

    def on(self, grid: Grid2D) -> np.ndarray:
        return self(*grid.mesh())


ZERO = PotentialSpec("zero")


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential: float
    cross: float
    quartic: float
    total: float

    @property
    def magnetic_kinetic(self) -> float:
        """The ``|(-i grad + beta A) u|^2`` part of the energy."""
        return self.kinetic + self.cross + self.quartic


def _link_diff(u, h, axis):
    if axis == 0:
        return (u[1:, :] - u[:-1, :]) / h
    return (u[:, 1:] - u[:, :-1]) / h


def _link_avg(u, axis):
    if axis == 0:
        return 0.5 * (u[1:, :] + u[:-1, :])
    return 0.5 * (u[:, 1:] + u[:, :-1])


def _link_diff_T(w, h, axis, shape, dtype):
    out = np.zeros(shape, dtype=dtype)
    if axis == 0:
        out[:-1, :] -= w / h
        out[1:, :] += w / h
    else:
        out[:, :-1] -= w / h
        out[:, 1:] += w / h
    return out


def _link_avg_T(v, axis, shape, dtype):
    out = np.zeros(shape, dtype=dtype)
    if axis == 0:
        out[:-1, :] += 0.5 * v
        out[1:, :] += 0.5 * v
    else:
        out[:, :-1] += 0.5 * v
        out[:, 1:] += 0.5 * v
    return out


class _Terms:
    """Per-state intermediate arrays, kept around for the gradient.

    Index 0/1 of the link tuples is the x/y link family.
    """

    __slots__ = ("u", "rho", "w", "m", "j", "rl", "ax", "ay", "al", "energy")


class Functional:
    """Array-level evaluator of the energy at fixed ``(grid, beta, V)``.

    Kinetic and magnetic terms live on the links between neighbouring
    nodes: the difference ``w = (u[i+1] - u[i]) / h``, the midpoint value
    ``m = (u[i] + u[i+1]) / 2`` and the link field ``a`` (average of the
    node potentials along the link) give the link integrand

        |-i w + beta a m|^2 = |w|^2 + 2 beta a Im(m* w) + beta^2 a^2 |m|^2.

    Each link carries the cell area as weight; the potential term sits on
    the nodes.  The minimiser works on raw arrays through this class; the
    public functions below wrap it for :class:`ComplexField` inputs.
    """

    def __init__(self, grid: Grid2D, beta: float, potential: PotentialSpec = ZERO,
                 kernel: KernelTable | None = None):
        self.grid = grid
        self.beta = float(beta)
        self.potential = potential
        self.kernel = kernel if kernel is not None else build_kernel(grid)
        if self.kernel.grid.shape != grid.shape or self.kernel.grid.spacing != grid.spacing:
            raise ContractViolation("kernel table was built for another grid")
        self.vvals = potential.on(grid) if potential.kind != "zero" else None
        self.mask = grid.mask
        self.area = grid.cell_area

    def terms(self, u: np.ndarray) -> _Terms:
        t = _Terms()
        h = self.grid.spacing
        t.u = u
        t.rho = u.real**2 + u.imag**2
        t.w = (_link_diff(u, h[0], 0), _link_diff(u, h[1], 1))
        t.m = (_link_avg(u, 0), _link_avg(u, 1))
        t.j = tuple((np.conj(m) * w).imag for m, w in zip(t.m, t.w))
        t.rl = tuple(m.real**2 + m.imag**2 for m in t.m)
        b = self.beta
        h2 = self.area
        kin = h2 * sum(float(np.sum(w.real**2 + w.imag**2)) for w in t.w)
        pot = h2 * float(np.sum(self.vvals * t.rho)) if self.vvals is not None else 0.0
        if b != 0.0:
            t.ax, t.ay = potential_arrays(t.rho, self.kernel)
            t.al = (_link_avg(t.ax, 0), _link_avg(t.ay, 1))
            cross = 2.0 * b * h2 * sum(float(np.sum(a * j)) for a, j in zip(t.al, t.j))
            quart = b * b * h2 * sum(float(np.sum(a * a * r)) for a, r in zip(t.al, t.rl))
        else:
            t.ax = t.ay = t.al = None
            cross = quart = 0.0
        t.energy = EnergyBreakdown(kin, pot, cross, quart, kin + pot + cross + quart)
        if DEBUG_CROSSCHECK:
            self._crosscheck(t)
        return t

    def _crosscheck(self, t):
        b = self.beta
        direct = 0.0
        for k in (0, 1):
            a = t.al[k] if t.al is not None else 0.0
            direct += float(np.sum(np.abs(-1j * t.w[k] + b * a * t.m[k]) ** 2))
        direct *= self.area
        expanded = t.energy.magnetic_kinetic
        if not math.isclose(direct, expanded, rel_tol=1e-10, abs_tol=1e-12):
            raise AssertionError(f"expanded kinetic-magnetic {expanded} != direct {direct}")

    def link_sums(self, t: _Terms) -> tuple[float, float]:
        """``(int A.j, int |A|^2 |u|^2)`` in the link discretisation."""
        if t.al is None:
            return 0.0, 0.0
        aj = sum(float(np.sum(a * j)) for a, j in zip(t.al, t.j))
        a2r = sum(float(np.sum(a * a * r)) for a, r in zip(t.al, t.rl))
        return self.area * aj, self.area * a2r

    def node_density(self, t: _Terms) -> np.ndarray:
        """Kinetic-magnetic integrand with each link split between its two nodes."""
        shape = self.grid.shape
        b = self.beta
        out = np.zeros(shape)
        for k in (0, 1):
            a = t.al[k] if t.al is not None else 0.0
            e = np.abs(-1j * t.w[k] + b * a * t.m[k]) ** 2
            out += _link_avg_T(e, k, shape, float)
        return out

    def energy(self, u: np.ndarray) -> float:
        return self.terms(u).energy.total

    def gradient(self, t: _Terms) -> np.ndarray:
        """EL operator applied to ``t.u``; ``dE = 2 Re<G, du>`` in the grid inner product."""
        u = t.u
        shape = self.grid.shape
        h = self.grid.spacing
        c = complex
        g = _link_diff_T(t.w[0], h[0], 0, shape, c) + _link_diff_T(t.w[1], h[1], 1, shape, c)
        if self.vvals is not None:
            g += self.vvals * u
        b = self.beta
        if b != 0.0:
            src = []
            for k in (0, 1):
                a = t.al[k]
                g += b * _link_avg_T(-1j * a * t.w[k] + b * a * a * t.m[k], k, shape, c)
                g += b * _link_diff_T(1j * a * t.m[k], h[k], k, shape, c)
                src.append(_link_avg_T(t.j[k] + b * a * t.rl[k], k, shape, float))
            s = potential_adjoint(src[0], src[1], self.kernel)
            g += (2.0 * b) * s * u
        if self.mask is not None:
            g[self.mask] = 0.0
        return g

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """Real inner product ``Re sum(conj(a) b) dA``."""
        return self.area * float(np.vdot(a, b).real)

    def norm(self, a: np.ndarray) -> float:
        return math.sqrt(self.inner(a, a))


# --- (1 - Laplacian)^-1 by fast diagonalisation ---------------------------


def _laplace_symbol(n, h, dirichlet):
    if dirichlet:
        k = np.arange(1, n + 1)
        return (2.0 - 2.0 * np.cos(np.pi * k / (n + 1))) / (h * h)
    k = np.arange(n)
    return (2.0 - 2.0 * np.cos(np.pi * k / n)) / (h * h)


def precondition(g: np.ndarray, grid: Grid2D, shift: float = 1.0) -> np.ndarray:
    """Apply ``(shift - Laplacian)^-1`` with the 5-point Laplacian of the grid's bc.

    Dirichlet grids solve on the interior nodes with zero ring (DST-I);
    Neumann and free grids use the mirrored-ghost Laplacian (DCT-II).
    """
    hx, hy = grid.spacing
    if grid.bc == BC.DIRICHLET:
        inner = g[1:-1, 1:-1]
        lx = _laplace_symbol(inner.shape[0], hx, True)
        ly = _laplace_symbol(inner.shape[1], hy, True)
        den = shift + lx[:, None] + ly[None, :]
        c = sfft.dstn(inner, type=1, norm="ortho")
        out = np.zeros_like(g)
        out[1:-1, 1:-1] = sfft.idstn(c / den, type=1, norm="ortho")
        return out
    lx = _laplace_symbol(g.shape[0], hx, False)
    ly = _laplace_symbol(g.shape[1], hy, False)
    den = shift + lx[:, None] + ly[None, :]
    c = sfft.dctn(g, type=2, norm="ortho")
    return sfft.idctn(c / den, type=2, norm="ortho")


# --- public operations ---------------------------------------------------


def _functional(u, beta, V, k):
    V = V if V is not None else ZERO
    if k is not None and (k.grid.shape != u.grid.shape or k.grid.spacing != u.grid.spacing):
        raise ContractViolation("kernel table was built for another grid")
    return Functional(u.grid, beta, V, k)


def _warn_unnormalized(u):
    n2 = float(np.sum(np.abs(u.values) ** 2)) * u.grid.cell_area
    if abs(n2 - 1.0) > 1e-8:
        log.warning("energy evaluated on a state with squared norm %.6g", n2)


def energy(u: ComplexField, beta: float, V: PotentialSpec | None = None,
           k: KernelTable | None = None) -> EnergyBreakdown:
    _warn_unnormalized(u)
    return _functional(u, beta, V, k).terms(u.values).energy


def el_apply(u: ComplexField, beta: float, V: PotentialSpec | None = None,
             k: KernelTable | None = None) -> ComplexField:
    f = _functional(u, beta, V, k)
    return ComplexField(u.grid, f.gradient(f.terms(u.values)))


def sobolev_gradient(u: ComplexField, beta: float, V: PotentialSpec | None = None,
                     k: KernelTable | None = None, shift: float = 1.0) -> ComplexField:
    """Preconditioned gradient on the unit sphere.

    ``(shift - Laplacian)^-1`` is applied to the L2 gradient
    ``G - <u, G> u`` and the result is projected orthogonally to ``u``.
    """
    f = _functional(u, beta, V, k)
    return ComplexField(u.grid, _sobolev_direction(f, u.values, f.gradient(f.terms(u.values)), shift))


def _sobolev_direction(f: Functional, u, g, shift):
    uu = f.inner(u, u)
    g = g - (f.inner(u, g) / uu) * u
    s = precondition(g, f.grid, shift)
    return s - (f.inner(u, s) / uu) * u


class ChemicalPotential(NamedTuple):
    first: float
    second: float


def chemical_potential(u: ComplexField, beta: float, V: PotentialSpec | None,
                       E: EnergyBreakdown, k: KernelTable | None = None) -> ChemicalPotential:
    """Both integral expressions of the Lagrange multiplier.

    ``first = E + int(2 beta A.j + 2 beta^2 |A|^2 |u|^2)`` uses the supplied
    breakdown; ``second`` re-integrates
    ``|grad u|^2 + V|u|^2 + 4 beta A.j + 3 beta^2 |A|^2 |u|^2`` from scratch.
    """
    f = _functional(u, beta, V, k)
    t = f.terms(u.values)
    b = f.beta
    aj, a2r = f.link_sums(t)
    first = E.total + 2.0 * b * aj + 2.0 * b * b * a2r
    kin = f.area * sum(float(np.sum(np.abs(w) ** 2)) for w in t.w)
    pot = f.area * float(np.sum(f.vvals * t.rho)) if f.vvals is not None else 0.0
    second = kin + pot + 4.0 * b * aj + 3.0 * b * b * a2r
    return ChemicalPotential(first, second)


class LowerBounds(NamedTuple):
    diamagnetic: float
    magnetic: float | None
    magnetic_kinetic: float

    @property
    def diamagnetic_slack(self) -> float:
        """Amount by which the diamagnetic bound is violated (<= 0 when it holds)."""
        return self.diamagnetic - self.magnetic_kinetic

    @property
    def magnetic_slack(self) -> float | None:
        return None if self.magnetic is None else self.magnetic - self.magnetic_kinetic


def lower_bounds(u: ComplexField, beta: float, E: EnergyBreakdown,
                 magnetic: bool = True) -> LowerBounds:
    """Diamagnetic ``int |grad|u||^2`` and magnetic ``2 pi beta ||u||_4^4`` bounds.

    The magnetic bound needs a Dirichlet state; asking for it on any other
    grid is a contract violation.
    """
    grid = u.grid
    if magnetic and grid.bc != BC.DIRICHLET:
        raise ContractViolation("the magnetic lower bound requires a Dirichlet state")
    mod = np.abs(u.values)
    hx, hy = grid.spacing
    dia = grid.cell_area * float(np.sum(_link_diff(mod, hx, 0) ** 2) + np.sum(_link_diff(mod, hy, 1) ** 2))
    mag = None
    if magnetic:
        mag = 2.0 * math.pi * abs(beta) * grid.cell_area * float(np.sum(mod**4))
    return LowerBounds(dia, mag, E.magnetic_kinetic)
