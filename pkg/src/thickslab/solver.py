"""Thick-slab asymptotic solution: diffusion constants, transmission, interior density.

Dropping every term of order exp(-D) decouples the two constants of the
interior solution f(z, mu) = a_s + 3 j [mu - z (1 - g1)] from the boundary
layers. Projecting both boundary conditions on the half-range weight gamma
gives

    (3/2) mu0 / X(-mu0) = a_s - (3/2) j D (1 - g1)
    (3/2) mu0 / X(-mu0) = 3 j z0 + (3/2) j D (1 - g1)

with z0 the first gamma moment.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .specfun import SQRT3, XFunction, default_xfunction, gamma_moments

THICK_SLAB_MIN_D = 5.0
BOUNDARY_LAYER_WIDTH = 3.0


class ThinSlabWarning(UserWarning):
    """The slab is too thin for exp(-D) terms to be negligible."""


@dataclass(frozen=True)
class SlabProblem:
    D: float
    g1: float = 0.0
    mu0: float = 1.0

    def __post_init__(self):
        if not (self.D > 0 and math.isfinite(self.D)):
            raise ValueError(f"optical thickness D must be positive, got {self.D}")
        if not -1.0 < self.g1 < 1.0:
            raise ValueError(f"anisotropy g1 must lie in (-1, 1), got {self.g1}")
        if not 0.0 < self.mu0 <= 1.0:
            raise ValueError(f"incidence cosine mu0 must lie in (0, 1], got {self.mu0}")

    @property
    def thick_slab_valid(self) -> bool:
        return self.D >= THICK_SLAB_MIN_D

    @property
    def scaled_thickness(self) -> float:
        """D (1 - g1), the only combination of D and g1 the solution sees."""
        return self.D * (1.0 - self.g1)


class DensityValue(NamedTuple):
    value: float | np.ndarray
    in_boundary_layer: bool | np.ndarray


@dataclass(frozen=True)
class AsymptoticSolution:
    a_s: float
    j: float
    z0: float
    problem: SlabProblem
    source: float  # (3/2) mu0 / X(-mu0), the common left-hand side

    @property
    def transmitted_fraction(self) -> float:
        """Transmitted particles per incident particle, j / mu0.

        The incident term 2 delta(mu - mu0) carries an inward current 2 mu0 and
        the interior net current is 2 j.
        """
        return self.j / self.problem.mu0

    def residuals(self) -> tuple[float, float]:
        """Residuals of the upper- and lower-sign equations of the thick-slab system."""
        half = 1.5 * self.j * self.problem.scaled_thickness
        return (self.a_s - half - self.source, 3.0 * self.j * self.z0 + half - self.source)


@lru_cache(maxsize=8)
def _z0(xf: XFunction) -> float:
    return gamma_moments(xf).gamma1


def solve_thick(p: SlabProblem, xf: XFunction | None = None) -> AsymptoticSolution:
    xf = xf or default_xfunction()
    if not p.thick_slab_valid:
        warnings.warn(f"D = {p.D} < {THICK_SLAB_MIN_D}: exp(-D) terms are not negligible",
                      ThinSlabWarning, stacklevel=2)
    z0 = _z0(xf)
    emergent = p.mu0 / xf(p.mu0)
    j = emergent / (p.scaled_thickness + 2.0 * z0)
    a_s = 1.5 * emergent + 1.5 * j * p.scaled_thickness
    return AsymptoticSolution(a_s=a_s, j=j, z0=z0, problem=p, source=1.5 * emergent)


def transmission(p: SlabProblem, xf: XFunction | None = None) -> float:
    """Transmission coefficient T = j = [mu0 / X(-mu0)] / (D (1 - g1) + 2 z0)."""
    return solve_thick(p, xf).j


def normal_incidence_transmission(D: float, g1: float = 0.0, xf: XFunction | None = None) -> float:
    """T at mu0 = 1 written through H(1): H(1) / (sqrt(3) (D (1 - g1) + 2 z0))."""
    xf = xf or default_xfunction()
    return float(xf.h(1.0)) / (SQRT3 * (D * (1.0 - g1) + 2.0 * _z0(xf)))


def isotropic_transmission(D: float, mu0: float, xf: XFunction | None = None) -> float:
    """T at g1 = 0 written through H: mu0 H(mu0) / (sqrt(3) (D + 2 z0))."""
    xf = xf or default_xfunction()
    return mu0 * float(xf.h(mu0)) / (SQRT3 * (D + 2.0 * _z0(xf)))


def _check_depth(s: AsymptoticSolution, z):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0.0) or np.any(z > s.problem.D):
        raise ValueError(f"depth must lie in [0, {s.problem.D}]")
    return z


def in_boundary_layer(s: AsymptoticSolution, z):
    z = _check_depth(s, z)
    out = np.minimum(z, s.problem.D - z) < BOUNDARY_LAYER_WIDTH
    return bool(out) if out.ndim == 0 else out


def interior_density(s: AsymptoticSolution, z, mu) -> DensityValue:
    """Asymptotic angular density a_s + 3 j [mu - z (1 - g1)].

    Accurate only at least three mean free paths from either face; the
    returned flag marks points inside a boundary layer.
    """
    z = _check_depth(s, z)
    mu = np.asarray(mu, dtype=float)
    if np.any(np.abs(mu) > 1.0):
        raise ValueError("mu must lie in [-1, 1]")
    f = s.a_s + 3.0 * s.j * (mu - z * (1.0 - s.problem.g1))
    flag = in_boundary_layer(s, z)
    return DensityValue(float(f) if np.ndim(f) == 0 else f, flag)


def scalar_profile(s: AsymptoticSolution, z):
    """(rho(z), J): mu-integrals of the asymptotic density; J = 2 j at every depth."""
    z = _check_depth(s, z)
    rho = 2.0 * s.a_s - 6.0 * s.j * z * (1.0 - s.problem.g1)
    current = np.full_like(rho, 2.0 * s.j)
    if rho.ndim == 0:
        return float(rho), float(current)
    return rho, current
