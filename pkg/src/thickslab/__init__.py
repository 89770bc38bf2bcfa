"""Thick-slab transport with linearly anisotropic conservative scattering.

Analytic side: X/H functions, the half-range weight gamma, singular
eigenfunction pairings, and the asymptotic transmission
T = [mu0 / X(-mu0)] / (D (1 - g1) + 2 z0). Oracle side: a Monte Carlo
solver of the same boundary-value problem.
"""
__version__ = "0.1.0"

from .quad import Quadrature, IntegralResult, QuadratureError, integrate, integrate_pv, integrate_endpoint_singular
from .specfun import (
    XFunction,
    GammaMoments,
    lambda_fn,
    a_fn,
    x_fn,
    h_fn,
    gamma_fn,
    gamma_moments,
)
from .eigen import phi_regular, pair_phi, pair_phi_neg
from .solver import (
    SlabProblem,
    AsymptoticSolution,
    ThinSlabWarning,
    solve_thick,
    transmission,
    interior_density,
    scalar_profile,
)

__all__ = [
    "Quadrature", "IntegralResult", "QuadratureError", "integrate", "integrate_pv",
    "integrate_endpoint_singular", "XFunction", "GammaMoments", "lambda_fn", "a_fn",
    "x_fn", "h_fn", "gamma_fn", "gamma_moments", "phi_regular", "pair_phi",
    "pair_phi_neg", "SlabProblem", "AsymptoticSolution", "ThinSlabWarning",
    "solve_thick", "transmission", "interior_density", "scalar_profile",
]
