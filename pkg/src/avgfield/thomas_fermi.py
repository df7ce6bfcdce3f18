"""Closed-form Thomas-Fermi theory for homogeneous trapping potentials.

For ``V(r) = |r|^s V(theta)`` every radial integral of the truncated bracket
``(lam - V)_+`` is elementary, so the whole model reduces to the single
angular constant ``Theta = int V(theta)^(-2/s) dtheta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, optimize

from .errors import ContractViolation, ModelError
from .functional import PotentialSpec
from .grid import ScalarField

DEFAULT_E11 = 2.0 * math.pi


@dataclass(frozen=True)
class TFProfile:
    e11: float
    lambda_tf: float
    s: float
    potential: PotentialSpec
    support_radius: float
    energy: float
    beta: float = 1.0
    area: float | None = None  # only for the flat (V = 0) box

    def density(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.potential.kind == "zero":
            return np.full(np.broadcast(x, y).shape, 1.0 / self.area)
        v = self.potential(x, y)
        return np.maximum(self.lambda_tf - v, 0.0) / (2.0 * self.e11 * self.beta)

    __call__ = density

    def support_along(self, theta):
        """Radius of the support boundary in direction ``theta``."""
        return (self.lambda_tf / self.potential.angular(theta)) ** (1.0 / self.s)


def _angular_constant(V: PotentialSpec) -> float:
    s = V.s
    val, _ = integrate.quad(lambda t: float(V.angular(t)) ** (-2.0 / s), 0.0, 2.0 * math.pi,
                            limit=200, epsabs=0.0, epsrel=1e-13)
    return val


def _min_angular(V: PotentialSpec) -> float:
    if V.kind == "harmonic":
        return min(V.a, V.b)
    return V.a


def _mass(lam, s, theta, e11):
    if lam <= 0:
        return 0.0
    return theta * s / (2.0 * (s + 2.0)) * lam ** ((s + 2.0) / s) / (2.0 * e11)


def tf_minimizer(V: PotentialSpec, e11: float = DEFAULT_E11, area: float = 1.0) -> TFProfile:
    """TF minimiser at ``beta = 1``.

    The chemical potential is found by bisection on the monotone mass
    function.  For ``V = 0`` the minimiser is the constant ``1/area`` on the box.
    """
    if not e11 > 0:
        raise ContractViolation("e11 must be positive")
    if V.kind == "zero":
        lam = 2.0 * e11 / area
        return TFProfile(e11, lam, math.inf, V, math.nan, e11 / area, 1.0, area)
    s = V.s
    theta = _angular_constant(V)
    hi = 1.0
    for _ in range(200):
        if _mass(hi, s, theta, e11) >= 1.0:
            break
        hi *= 2.0
    else:
        raise ModelError("could not bracket the TF chemical potential")
    lam = optimize.bisect(lambda t: _mass(t, s, theta, e11) - 1.0, 0.0, hi,
                          xtol=1e-15, rtol=1e-14, maxiter=400)
    c_sq = 0.5 - 2.0 / (s + 2.0) + 1.0 / (2.0 * s + 2.0)
    c_v = 1.0 / (s + 2.0) - 1.0 / (2.0 * s + 2.0)
    energy = lam ** (2.0 + 2.0 / s) * theta * (c_sq / (4.0 * e11) + c_v / (2.0 * e11))
    r0 = (lam / _min_angular(V)) ** (1.0 / s)
    return TFProfile(e11, lam, s, V, r0, energy)


def _polar_integral(profile: TFProfile, radial):
    """``int dtheta int_0^R(theta) radial(r, theta) r dr`` by adaptive quadrature."""

    def inner(theta):
        R = float(profile.support_along(theta))
        val, _ = integrate.quad(lambda r: radial(r, theta) * r, 0.0, R,
                                epsabs=0.0, epsrel=1e-13, limit=200)
        return val

    val, _ = integrate.quad(inner, 0.0, 2.0 * math.pi, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def tf_mass(profile: TFProfile) -> float:
    if profile.potential.kind == "zero":
        return 1.0

    def rho(r, t):
        return float(profile.density(r * math.cos(t), r * math.sin(t)))

    return _polar_integral(profile, rho)


def tf_energy(rho, beta: float, V: PotentialSpec, e11: float = DEFAULT_E11,
              norm_tol: float = 1e-8) -> float:
    """``int e11 beta rho^2 + V rho`` for a profile or a grid density."""
    if isinstance(rho, ScalarField):
        grid = rho.grid
        vals = rho.values
        if np.any(vals < 0):
            raise ContractViolation("density must be non-negative")
        mass = float(np.sum(vals)) * grid.cell_area
        if abs(mass - 1.0) > norm_tol:
            raise ContractViolation(f"density is not normalised (mass {mass:.12g})")
        integrand = e11 * beta * vals * vals
        if V.kind != "zero":
            integrand = integrand + V.on(grid) * vals
        return float(np.sum(integrand)) * grid.cell_area
    if not isinstance(rho, TFProfile):
        raise TypeError("rho must be a TFProfile or a ScalarField")
    if rho.potential.kind == "zero":
        return e11 * beta / rho.area
    mass = tf_mass(rho)
    if abs(mass - 1.0) > norm_tol:
        raise ContractViolation(f"density is not normalised (mass {mass:.12g})")

    def integrand(r, t):
        x, y = r * math.cos(t), r * math.sin(t)
        d = float(rho.density(x, y))
        return e11 * beta * d * d + float(V(x, y)) * d

    return _polar_integral(rho, integrand)


def tf_scale(E1: float, beta: float, s: float) -> float:
    if not beta > 0:
        raise ContractViolation("beta must be positive")
    return beta ** (s / (s + 2.0)) * E1


def tf_scale_density(rho1: TFProfile, beta: float, s: float | None = None) -> TFProfile:
    """Profile of ``beta^(-2/(2+s)) rho1(beta^(-1/(s+2)) r)``."""
    if not beta > 0:
        raise ContractViolation("beta must be positive")
    s = rho1.s if s is None else s
    f = beta / rho1.beta
    return replace(
        rho1,
        lambda_tf=rho1.lambda_tf * f ** (s / (s + 2.0)),
        support_radius=rho1.support_radius * f ** (1.0 / (s + 2.0)),
        energy=rho1.energy * f ** (s / (s + 2.0)),
        beta=beta,
    )


def homogeneous_energy(gamma: float, density: float, e11: float = DEFAULT_E11) -> float:
    if gamma < 0 or density < 0:
        raise ContractViolation("gamma and density must be non-negative")
    return gamma * density * density * e11
