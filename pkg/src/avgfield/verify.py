"""Quick invariant battery behind ``af verify``.

Each check returns a :class:`Check` with the measured value and the
threshold it was held to.  The battery runs in a few seconds on the default
resolution; it is a smoke test, not a substitute for the test suite.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

from .functional import Functional, PotentialSpec, chemical_potential, energy, lower_bounds
from .grid import BC, ComplexField, ScalarField, make_grid, normalize, rescale_state
from .kernel import build_kernel, curl, exterior_field, vector_potential
from .thomas_fermi import tf_minimizer
from .trial import factorization_check, trial_grid, vortex_lattice_trial


class Check(NamedTuple):
    name: str
    passed: bool
    value: float
    threshold: float


def random_smooth_state(grid, rng: np.random.Generator, modes: int = 4) -> ComplexField:
    """Sum of a few Gaussian packets with random centres, widths and phase gradients.

    Dirichlet grids get an extra ``sin`` envelope so the state vanishes at the wall.
    """
    X, Y = grid.mesh()
    (x0, y0), (lx, ly) = grid.origin, grid.extent
    u = np.zeros(grid.shape, dtype=complex)
    for _ in range(modes):
        cx = x0 + lx * rng.uniform(0.25, 0.75)
        cy = y0 + ly * rng.uniform(0.25, 0.75)
        w = min(lx, ly) * rng.uniform(0.1, 0.25)
        kx, ky = rng.normal(scale=4.0 / min(lx, ly), size=2)
        amp = rng.normal() + 1j * rng.normal()
        u += amp * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * w * w) + 1j * (kx * X + ky * Y))
    if grid.bc == BC.DIRICHLET:
        u *= np.sin(np.pi * (X - x0) / lx) * np.sin(np.pi * (Y - y0) / ly)
        u[grid.mask] = 0.0
    return normalize(ComplexField(grid, u))


def smooth_bump(grid, center=(0.0, 0.0), radius=0.25) -> ScalarField:
    """``(1 - r^2/a^2)^4`` on the disc of radius ``a``, unit mass on the grid."""
    X, Y = grid.mesh()
    r2 = ((X - center[0]) ** 2 + (Y - center[1]) ** 2) / radius**2
    rho = np.where(r2 < 1.0, (1.0 - r2) ** 4, 0.0)
    return ScalarField(grid, rho / (rho.sum() * grid.cell_area))


def check_curl(n: int = 128) -> Check:
    g = make_grid((2.0, 2.0), (n, n), BC.FREE, centered=True)
    rho = smooth_bump(g, radius=0.5)
    c = curl(vector_potential(rho, build_kernel(g))).values
    sl = (slice(2, -2), slice(2, -2))
    target = 2.0 * math.pi * rho.values[sl]
    err = float(np.linalg.norm(c[sl] - target) / np.linalg.norm(target))
    return Check("curl identity", err <= 1e-2, err, 1e-2)


def check_newton(n: int = 128) -> Check:
    g = make_grid((2.0, 2.0), (n, n), BC.FREE, centered=True)
    a = 0.2
    rho = smooth_bump(g, radius=a)
    A = vector_potential(rho, build_kernel(g))
    X, Y = g.mesh()
    r = np.hypot(X, Y)
    sel = (r >= 2 * a) & (r <= 4 * a)
    ex = np.array([exterior_field(1.0, (0.0, 0.0), (x, y)) for x, y in zip(X[sel], Y[sel])])
    got = np.column_stack([A.x[sel], A.y[sel]])
    err = float(np.max(np.linalg.norm(got - ex, axis=1) / np.linalg.norm(ex, axis=1)))
    return Check("newton exterior field", err <= 1e-3, err, 1e-3)


def check_mu_identity(n: int = 32, count: int = 6, seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    V = PotentialSpec("harmonic", 1.0, 2.0)
    for i in range(count):
        beta = (0.0, 1.0, 10.0)[i % 3]
        g = make_grid((1.0, 1.0), (n, n), (BC.DIRICHLET, BC.NEUMANN)[i % 2], centered=True)
        u = random_smooth_state(g, rng)
        E = energy(u, beta, V)
        m1, m2 = chemical_potential(u, beta, V, E)
        worst = max(worst, abs(m1 - m2) / abs(m1))
    return Check("chemical potential identity", worst <= 1e-11, worst, 1e-11)


def check_scaling(n: int = 32, seed: int = 1) -> Check:
    rng = np.random.default_rng(seed)
    g = make_grid((1.0, 1.0), (n, n), BC.NEUMANN)
    u = random_smooth_state(g, rng)
    beta = 3.0
    worst = 0.0
    for lam, mu in ((2.0, 1.0), (1.0, 2.0), (0.5, 3.0)):
        v = rescale_state(u, lam, mu)
        lhs = Functional(v.grid, beta).energy(v.values)
        rhs = lam**2 * Functional(g, lam**2 * mu**2 * beta).energy(u.values)
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    return Check("scaling law", worst <= 1e-10, worst, 1e-10)


def check_bounds(n: int = 64, count: int = 6, seed: int = 2, slack: float = 1e-2) -> list[Check]:
    rng = np.random.default_rng(seed)
    dia = mag = -math.inf
    g = make_grid((1.0, 1.0), (n, n), BC.DIRICHLET)
    for i in range(count):
        u = random_smooth_state(g, rng)
        beta = (1.0, 5.0, 20.0)[i % 3]
        lb = lower_bounds(u, beta, energy(u, beta))
        dia = max(dia, lb.diamagnetic_slack / lb.magnetic_kinetic)
        mag = max(mag, lb.magnetic_slack / lb.magnetic_kinetic)
    return [Check("diamagnetic bound", dia <= slack, dia, slack),
            Check("magnetic bound", mag <= slack, mag, slack)]


def check_factorization(cells: int = 32) -> Check:
    trial = vortex_lattice_trial(trial_grid(4.0, cells), 4.0)
    err = factorization_check(trial).rel_error
    return Check("trial factorisation", err <= 2e-2, err, 2e-2)


def check_gradient(n: int = 24, seed: int = 3) -> Check:
    rng = np.random.default_rng(seed)
    g = make_grid((1.0, 1.0), (n, n), BC.DIRICHLET)
    u = random_smooth_state(g, rng).values
    v = random_smooth_state(g, rng).values
    f = Functional(g, 7.0, PotentialSpec("harmonic"))
    an = 2.0 * f.inner(f.gradient(f.terms(u)), v)
    eps = 1e-5
    fd = (f.energy(u + eps * v) - f.energy(u - eps * v)) / (2 * eps)
    err = abs(fd - an) / abs(an)
    return Check("gradient consistency", err <= 1e-5, err, 1e-5)


def check_tf() -> Check:
    p = tf_minimizer(PotentialSpec("harmonic"), 2.0 * math.pi)
    err = max(abs(p.lambda_tf - 2.0 * math.sqrt(2.0)) / (2 * math.sqrt(2.0)),
              abs(p.energy - p.lambda_tf**3 / 12.0) / p.energy)
    return Check("TF closed forms", err <= 1e-9, err, 1e-9)


BATTERY: tuple[Callable[[], object], ...] = (
    check_curl, check_newton, check_mu_identity, check_scaling, check_bounds,
    check_factorization, check_gradient, check_tf,
)


def run_battery() -> list[Check]:
    out = []
    for fn in BATTERY:
        res = fn()
        out.extend(res if isinstance(res, list) else [res])
    return out
