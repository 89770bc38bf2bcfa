"""Identity suite for the analytic machinery.

Each function returns a list of ``Check`` rows; ``run_all`` strings them
together for ``thickslab verify`` and the acceptance tests.
"""
from __future__ import annotations

import itertools
import warnings

import numpy as np

from .checks import Check, within
from .eigen import pair_phi, pair_phi_neg, phi_regular
from .quad import Quadrature, integrate
from .solver import (
    SlabProblem,
    ThinSlabWarning,
    isotropic_transmission,
    normal_incidence_transmission,
    solve_thick,
    transmission,
)
from .specfun import XFunction, default_xfunction, gamma_moments, x_fn

DEFAULT_TOLERANCES = {
    "gamma0": 1e-6,
    "gamma1": 5e-4,
    "orthogonality": 1e-6,
    "normalization": 1e-6,
    "residual": 1e-12,
    "scaling": 1e-12,
    "restriction": 1e-12,
    "self_convergence": 1e-9,
    "cache": 1e-9,
}

# Reference value of the isotropic Milne extrapolation length quoted in the literature
Z0_REFERENCE = 0.7104

NU_GRID = np.round(np.arange(1, 20) * 0.05, 10)
MU_GRID = np.linspace(0.0, 1.0, 101)
SOLVER_GRID = {
    "D": (5.0, 10.0, 20.0, 50.0, 100.0),
    "g1": (-0.9, -0.3, 0.0, 0.3, 0.9),
    "mu0": (0.1, 0.3, 0.5, 0.8, 1.0),
}


def _tol(overrides, key):
    return (overrides or {}).get(key, DEFAULT_TOLERANCES[key])


def moment_checks(xf: XFunction | None = None, tolerances=None) -> list[Check]:
    m = gamma_moments(xf)
    return [
        within("gamma0 = int gamma", m.gamma0, 1.0, _tol(tolerances, "gamma0")),
        within("gamma1 = z0", m.gamma1, Z0_REFERENCE, _tol(tolerances, "gamma1")),
        within("gamma1 / gamma0 = mean nu", m.mean_nu, Z0_REFERENCE, _tol(tolerances, "gamma1")),
    ]


def orthogonality_checks(xf: XFunction | None = None, tolerances=None, nus=NU_GRID) -> list[Check]:
    xf = xf or default_xfunction()
    worst = max(abs(pair_phi(float(nu), xf.gamma)) for nu in nus)
    return [within("max |<phi_nu, gamma>|", worst, 0.0, _tol(tolerances, "orthogonality"),
                   f"{len(nus)} nu values")]


def normalization_checks(xf: XFunction | None = None, tolerances=None, nus=NU_GRID) -> list[Check]:
    xf = xf or default_xfunction()
    tol = _tol(tolerances, "normalization")
    pair_dev, alt_dev, h_dev = 0.0, 0.0, 0.0
    for nu in map(float, nus):
        pairing = pair_phi_neg(nu, xf.gamma)
        x_nu = x_fn(nu)
        pair_dev = max(pair_dev, abs(pairing - 0.5 * nu * x_nu))
        alt_dev = max(alt_dev, abs(pairing - 0.75 * nu * nu / xf.gamma(nu)))
        res = integrate(lambda mu: xf.gamma(mu) / (nu + mu), 0.0, 1.0, xf.quad)
        h_dev = max(h_dev, abs(res.value - x_nu))
    return [
        within("max |<phi_-nu, gamma> - (nu/2) X(-nu)|", pair_dev, 0.0, tol),
        within("max |<phi_-nu, gamma> - (3/4) nu^2 / gamma(nu)|", alt_dev, 0.0, tol),
        within("max |int gamma/(nu+mu) - X(-nu)|", h_dev, 0.0, tol),
    ]


def solver_checks(xf: XFunction | None = None, tolerances=None) -> list[Check]:
    xf = xf or default_xfunction()
    res_dev, scale_dev = 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ThinSlabWarning)
        for D, g1, mu0 in itertools.product(*SOLVER_GRID.values()):
            s = solve_thick(SlabProblem(D, g1, mu0), xf)
            res_dev = max(res_dev, *map(abs, s.residuals()))
            t_scaled = transmission(SlabProblem(D * (1.0 - g1), 0.0, mu0), xf)
            scale_dev = max(scale_dev, abs(s.j - t_scaled))
        restr = 0.0
        for D in SOLVER_GRID["D"]:
            for g1 in SOLVER_GRID["g1"]:
                restr = max(restr, abs(transmission(SlabProblem(D, g1, 1.0), xf)
                                       - normal_incidence_transmission(D, g1, xf)))
            for mu0 in SOLVER_GRID["mu0"]:
                restr = max(restr, abs(transmission(SlabProblem(D, 0.0, mu0), xf)
                                       - isotropic_transmission(D, mu0, xf)))
    return [
        within("max thick-slab system residual", res_dev, 0.0, _tol(tolerances, "residual"),
               "5x5x5 (D, g1, mu0) grid"),
        within("max |T(D, g1) - T(D(1-g1), 0)|", scale_dev, 0.0, _tol(tolerances, "scaling")),
        within("max |T - restricted formula| (mu0=1, g1=0)", restr, 0.0,
               _tol(tolerances, "restriction")),
    ]


def symmetry_checks(tolerances=None) -> list[Check]:
    nus = np.concatenate([NU_GRID, [1.0]])
    mus = np.linspace(-1.0, 1.0, 41)
    worst = 0.0
    for nu in nus:
        m = mus[mus != -nu]
        worst = max(worst, float(np.max(np.abs(phi_regular(-nu, m) - phi_regular(nu, -m)))))
    return [Check("max |phi_-nu(mu) - phi_nu(-mu)|", worst, 0.0, 0.0, worst == 0.0, "exact")]


def convergence_checks(xf: XFunction | None = None, tolerances=None) -> list[Check]:
    xf = xf or default_xfunction()
    q = xf.quad
    base = x_fn(MU_GRID, 1.0, q)
    doubled = x_fn(MU_GRID, 1.0, q.refined())
    off_grid = np.concatenate([np.random.default_rng(2024).uniform(0.0, 1.0, 200),
                               10.0 ** np.linspace(-12, -1, 23), MU_GRID[:-1] + 0.005])
    cache_dev = float(np.max(np.abs(xf(off_grid) - x_fn(off_grid, 1.0, q))))
    return [
        within("max |X(-mu) doubled nodes - X(-mu)|", np.max(np.abs(doubled - base)), 0.0,
               _tol(tolerances, "self_convergence"), "101-point mu grid"),
        within("max |X cached - X direct|", cache_dev, 0.0, _tol(tolerances, "cache"),
               f"{off_grid.size} off-grid points"),
        Check("X(-mu) strictly decreasing", float(np.max(np.diff(base))), 0.0, 0.0,
              bool(np.all(np.diff(base) < 0.0))),
    ]


def run_all(tolerances=None, quad: Quadrature | None = None) -> list[Check]:
    xf = default_xfunction() if quad is None else XFunction(quad=quad)
    return (moment_checks(xf, tolerances) + orthogonality_checks(xf, tolerances)
            + normalization_checks(xf, tolerances) + solver_checks(xf, tolerances)
            + symmetry_checks(tolerances) + convergence_checks(xf, tolerances))
