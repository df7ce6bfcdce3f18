"""Constrained minimisation of the average-field energy on the unit L2 sphere.

Descent direction: the Sobolev gradient ``(c - Laplacian)^-1 (G - mu u)``
projected on the tangent space of the sphere, optionally combined with the
previous direction (Polak-Ribiere+, restarted whenever it stops being a
descent direction).  Steps are retracted by renormalising and accepted by
Armijo backtracking, so the energy trace never increases.
"""

from __future__ import annotations

import concurrent.futures as cf
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .diagnostics import detect_vortices
from .errors import ConfigurationError, InsufficientDataError, NumericalFailure
from .functional import (
    ZERO,
    EnergyBreakdown,
    Functional,
    PotentialSpec,
    precondition,
)
from .grid import BC, ComplexField, Grid2D
from .kernel import KernelTable

log = logging.getLogger(__name__)

STRATEGIES = ("constant", "random-phase", "vortex-seeded")
VORTEX_SEED_MIN_BETA = 10.0


@dataclass(frozen=True)
class MinimizeSettings:
    max_iterations: int = 2000
    initial_step: float = 1.0
    shrink: float = 0.5
    grow: float = 1.5
    sufficient_decrease: float = 1e-4
    min_step: float = 1e-12
    tol_energy: float = 1e-9
    tol_residual: float = 1e-3
    init: str | None = None  # None picks vortex-seeded for beta >= 10, constant otherwise
    seed: int = 0
    method: str = "cg"
    shift: float | None = None  # preconditioner shift; None = max(1, mu of the start state)
    restarts: int = 3

    def __post_init__(self):
        if not (self.tol_energy > 0 and self.tol_residual > 0):
            raise ConfigurationError("tolerances must be positive", key="tol")
        if not 0.0 < self.shrink < 1.0:
            raise ConfigurationError("shrink factor must lie in (0, 1)", key="shrink")
        if self.max_iterations < 0:
            raise ConfigurationError("max_iterations must be non-negative", key="max_iters")
        if self.init is not None and self.init not in STRATEGIES:
            raise ConfigurationError(f"unknown init strategy {self.init!r}", key="init")
        if self.method not in ("sd", "cg"):
            raise ConfigurationError(f"unknown descent method {self.method!r}", key="method")
        if self.restarts < 1:
            raise ConfigurationError("restarts must be at least 1", key="restarts")

    def strategy_for(self, beta: float) -> str:
        if self.init is not None:
            return self.init
        return "vortex-seeded" if beta >= VORTEX_SEED_MIN_BETA else "constant"


@dataclass
class MinimizeReport:
    iterations: int
    energy: EnergyBreakdown
    residual: float
    mu: float
    trace: list = field(default_factory=list)
    converged: bool = False
    seed: int = 0


# --- initial states ------------------------------------------------------


def seed_centers(grid: Grid2D, count: int, rng: np.random.Generator | None = None,
                 jitter: float = 0.1) -> np.ndarray:
    """Roughly uniform vortex positions: balanced rows, optional seeded jitter.

    Jitter is a fraction of the local spacing.
    """
    if count <= 0:
        return np.zeros((0, 2))
    lx, ly = grid.extent
    rows = max(1, int(round(math.sqrt(count * ly / lx))))
    rows = min(rows, count)
    pts = []
    for r in range(rows):
        n = count // rows + (1 if r < count % rows else 0)
        y = (r + 0.5) * ly / rows
        for k in range(n):
            pts.append(((k + 0.5) * lx / n, y, lx / n, ly / rows))
    pts = np.array(pts)
    centers = pts[:, :2] + np.array(grid.origin)
    if rng is not None and jitter > 0:
        centers = centers + jitter * pts[:, 2:] * rng.uniform(-1.0, 1.0, size=(len(pts), 2))
    return centers


def _finish(grid, values):
    if grid.mask is not None:
        values = np.where(grid.mask, 0.0, values)
    nrm = math.sqrt(float(np.sum(np.abs(values) ** 2)) * grid.cell_area)
    return ComplexField(grid, values / nrm)


def init_state(grid: Grid2D, strategy: str, beta: float, seed: int = 0) -> ComplexField:
    """Normalised starting field.

    ``vortex-seeded`` has unit modulus and the phase ``-sum arg(r - r_k)`` of
    ``floor(beta)`` vortices placed on balanced rows with seeded jitter.
    """
    if strategy not in STRATEGIES:
        raise ConfigurationError(f"unknown init strategy {strategy!r}", key="init")
    rng = np.random.default_rng(seed)
    if strategy == "constant":
        values = np.ones(grid.shape, dtype=complex)
    elif strategy == "random-phase":
        values = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=grid.shape))
    else:
        centers = seed_centers(grid, int(math.floor(beta)), rng)
        X, Y = grid.mesh()
        phase = np.zeros(grid.shape)
        for cx, cy in centers:
            phase -= np.arctan2(Y - cy, X - cx)
        values = np.exp(1j * phase)
    return _finish(grid, values)


# --- descent -------------------------------------------------------------


class _Step(NamedTuple):
    u: np.ndarray
    terms: object


def _normalized(f: Functional, v):
    return v / f.norm(v)


def minimize(u0: ComplexField, beta: float, V: PotentialSpec | None = None, bc=None,
             settings: MinimizeSettings | None = None,
             kernel: KernelTable | None = None) -> tuple[ComplexField, MinimizeReport]:
    settings = settings or MinimizeSettings()
    V = V or ZERO
    grid = u0.grid if bc is None else u0.grid.with_bc(bc)
    u = u0.values.copy()
    if grid.mask is not None:
        u[grid.mask] = 0.0
    f = Functional(grid, beta, V, kernel)
    u = _normalized(f, u)
    t = f.terms(u)
    E = t.energy.total
    trace = [E]
    if not math.isfinite(E):
        raise NumericalFailure("initial energy is not finite", trace)
    g = f.gradient(t)
    mu = f.inner(u, g)
    shift = settings.shift if settings.shift is not None else max(1.0, mu)
    tau = settings.initial_step
    d_prev = s_prev = r_prev = None
    converged = False
    residual = math.inf
    it = 0
    while True:
        mu = f.inner(u, g)
        r = g - mu * u
        residual = f.norm(r) / max(1.0, abs(mu))
        if len(trace) > 1:
            dE = abs(trace[-2] - trace[-1])
            if dE <= settings.tol_energy * max(1.0, abs(E)) and residual <= settings.tol_residual:
                converged = True
                break
        if it >= settings.max_iterations:
            break
        s = precondition(r, grid, shift)
        s = s - f.inner(u, s) * u
        d = -s
        if settings.method == "cg" and d_prev is not None:
            denom = f.inner(r_prev, s_prev)
            if denom > 0:
                pr = max(0.0, f.inner(r, s - s_prev) / denom)
                dp = d_prev - f.inner(u, d_prev) * u
                d = -s + pr * dp
        slope = 2.0 * f.inner(g, d)
        if slope >= 0:
            d = -s
            slope = 2.0 * f.inner(g, d)
        if slope >= 0:
            # gradient vanished to round-off
            converged = residual <= settings.tol_residual
            break
        accepted = None
        while tau >= settings.min_step:
            u_try = _normalized(f, u + tau * d)
            t_try = f.terms(u_try)
            E_try = t_try.energy.total
            if not math.isfinite(E_try):
                raise NumericalFailure(f"non-finite energy at iteration {it}", trace)
            if E_try <= E + settings.sufficient_decrease * tau * slope:
                accepted = _Step(u_try, t_try)
                break
            tau *= settings.shrink
        if accepted is None:
            converged = residual <= settings.tol_residual
            log.debug("line search stalled at iteration %d (residual %.3g)", it, residual)
            break
        it += 1
        u, t = accepted
        E = t.energy.total
        trace.append(E)
        d_prev, s_prev, r_prev = d, s, r
        g = f.gradient(t)
        tau = min(tau * settings.grow, 1e6)
    mu = f.inner(u, g)
    report = MinimizeReport(it, t.energy, residual, mu, trace, converged, settings.seed)
    return ComplexField(grid, u), report


def ground_state(grid: Grid2D, beta: float, V: PotentialSpec | None = None,
                 settings: MinimizeSettings | None = None,
                 u0: ComplexField | None = None) -> tuple[ComplexField, MinimizeReport]:
    """Best of ``settings.restarts`` minimisations from seeds ``seed, seed+1, ...``.

    A warm start ``u0`` replaces the first restart.
    """
    settings = settings or MinimizeSettings()
    strategy = settings.strategy_for(beta)
    best = None
    for k in range(settings.restarts):
        seed = settings.seed + k
        if k == 0 and u0 is not None:
            start = u0
        else:
            start = init_state(grid, strategy, beta, seed)
        u, rep = minimize(start, beta, V, grid.bc, replace(settings, seed=seed))
        if best is None or rep.energy.total < best[1].energy.total:
            best = (u, rep)
        if strategy == "constant" and u0 is None:
            break  # deterministic start: further restarts repeat it
    return best


# --- sweeps --------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    beta: float
    bc: str
    grid: int
    energy: float
    energy_per_beta: float
    kinetic: float
    potential: float
    cross: float
    quartic: float
    mu: float
    residual: float
    iterations: int
    vortex_count: int
    seed: int
    converged: bool = False
    error: str = ""

    CSV_COLUMNS = ("beta", "bc", "grid", "energy", "energy_per_beta", "kinetic", "potential",
                   "cross", "quartic", "mu", "residual", "iterations", "vortex_count", "seed")

    def csv_values(self):
        return [getattr(self, c) for c in self.CSV_COLUMNS]


def row_from(beta, grid: Grid2D, u: ComplexField, rep: MinimizeReport) -> SweepRow:
    e = rep.energy
    return SweepRow(
        float(beta), grid.bc.name.lower(), grid.nx, e.total, e.total / beta if beta else math.nan,
        e.kinetic, e.potential, e.cross, e.quartic, rep.mu, rep.residual, rep.iterations,
        len(detect_vortices(u)), rep.seed, rep.converged,
    )


def _failed_row(beta, grid, seed, exc):
    nan = math.nan
    return SweepRow(float(beta), grid.bc.name.lower(), grid.nx, nan, nan, nan, nan, nan, nan,
                    nan, nan, 0, 0, seed, False, f"{type(exc).__name__}: {exc}")


def _sweep_job(args):
    beta, V, grid, settings = args
    try:
        u, rep = ground_state(grid, beta, V, settings)
        return row_from(beta, grid, u, rep), u
    except Exception as exc:  # per-beta failures are recorded, the sweep goes on
        log.warning("beta=%g failed: %s", beta, exc)
        return _failed_row(beta, grid, settings.seed, exc), None


def worker_count(requested: int | None = None) -> int:
    env = os.environ.get("AF_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    n = requested if requested is not None else cap
    return max(1, min(n, cap))


def sweep(betas, V: PotentialSpec | None, bc, grid: Grid2D,
          settings: MinimizeSettings | None = None, warm_start: bool = False,
          workers: int | None = None) -> list[SweepRow]:
    """Independent (or warm-started) minimisations along an ascending beta list."""
    betas = [float(b) for b in betas]
    if not betas:
        raise ConfigurationError("beta list is empty", key="betas")
    if any(b <= 0 for b in betas) or betas != sorted(betas):
        raise ConfigurationError("beta list must be positive and ascending", key="betas")
    settings = settings or MinimizeSettings()
    V = V or ZERO
    grid = grid.with_bc(bc)
    if warm_start:
        rows, prev = [], None
        for b in betas:
            try:
                u, rep = ground_state(grid, b, V, settings, u0=prev)
                rows.append(row_from(b, grid, u, rep))
                prev = u
            except Exception as exc:
                log.warning("beta=%g failed: %s", b, exc)
                rows.append(_failed_row(b, grid, settings.seed, exc))
        return rows
    jobs = [(b, V, grid, settings) for b in betas]
    n = worker_count(workers)
    if n == 1 or len(jobs) == 1:
        return [_sweep_job(j)[0] for j in jobs]
    with cf.ProcessPoolExecutor(max_workers=n) as pool:
        return [r for r, _ in pool.map(_sweep_job, jobs)]


# --- e(1,1) extrapolation -------------------------------------------------


class E11Estimate(NamedTuple):
    estimate: float
    slopes: dict
    rms_residual: float
    rows_used: int
    area: float


RATE_EXPONENT = 1.0 / 7.0


def estimate_e11(rows, area: float = 1.0, rate: float = RATE_EXPONENT) -> E11Estimate:
    """Fit ``E/beta = a + b_bc beta^(-rate)`` with one intercept shared by all bcs.

    The intercept times the box area estimates e(1,1).  ``rate`` defaults to
    1/7; other values are for sensitivity studies only.
    """
    if not rate > 0:
        raise ConfigurationError(f"rate must be positive, got {rate}", key="rate")
    rows = [r for r in rows if math.isfinite(r.energy_per_beta)]
    if len(rows) < 3:
        raise InsufficientDataError(f"need at least 3 sweep rows, got {len(rows)}")
    bcs = sorted({r.bc for r in rows})
    A = np.zeros((len(rows), 1 + len(bcs)))
    y = np.zeros(len(rows))
    for i, r in enumerate(rows):
        A[i, 0] = 1.0
        A[i, 1 + bcs.index(r.bc)] = r.beta ** (-rate)
        y[i] = r.energy_per_beta
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return E11Estimate(float(coef[0]) * area, {bc: float(c) for bc, c in zip(bcs, coef[1:])},
                       float(np.sqrt(np.mean(res**2))), len(rows), area)
