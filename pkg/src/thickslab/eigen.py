"""Singular eigenfunctions phi_nu(mu) and their pairings with smooth weights.

phi_nu is a distribution: a principal-value kernel (nu/2) P 1/(nu - mu) plus
lambda(nu) delta(nu - mu). It is only exposed through ordinary point values
away from mu = nu and through pairings <phi_nu, w> = int_0^1 phi_nu(mu) w(mu) dmu.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .quad import Quadrature, QuadratureError, integrate, integrate_pv
from .specfun import lambda_fn


def phi_regular(nu, mu):
    """(nu/2) / (nu - mu) for mu != nu."""
    nu = np.asarray(nu, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(nu == 0.0) or np.any(np.abs(nu) > 1.0):
        raise ValueError("eigenvalue nu must satisfy 0 < |nu| <= 1")
    if np.any(mu == nu):
        raise ValueError("phi_nu is singular at mu = nu; use pair_phi for pairings")
    out = 0.5 * nu / (nu - mu)
    return float(out) if out.ndim == 0 else out


def _check(res, what):
    if not res.converged:
        raise QuadratureError(f"{what} did not converge (error estimate {res.error_estimate:.3g})")
    return res.value


def pair_phi(nu: float, w: Callable, q: Quadrature | None = None) -> float:
    """<phi_nu, w> over [0, 1] for 0 < nu < 1.

    The principal-value part goes through singularity subtraction, the delta
    part contributes lambda(nu) w(nu).
    """
    if not 0.0 < nu < 1.0:
        raise ValueError("pair_phi needs 0 < nu < 1")
    q = q or Quadrature()
    pv = _check(integrate_pv(w, nu, 0.0, 1.0, q), "principal-value pairing")
    w_nu = float(np.asarray(w(np.array([nu])), dtype=float)[0])
    return 0.5 * nu * pv + lambda_fn(nu) * w_nu


def pair_phi_neg(nu: float, w: Callable, q: Quadrature | None = None) -> float:
    """<phi_{-nu}, w> over [0, 1] for 0 < nu <= 1.

    phi_{-nu}(mu) = phi_nu(-mu) has its pole at mu = -nu, off the range, so the
    pairing is an ordinary integral of (nu/2) w(mu) / (nu + mu).
    """
    if not 0.0 < nu <= 1.0:
        raise ValueError("pair_phi_neg needs 0 < nu <= 1")
    q = q or Quadrature()
    res = integrate(lambda mu: np.asarray(w(mu), dtype=float) / (nu + mu), 0.0, 1.0, q)
    return 0.5 * nu * _check(res, "pairing with phi_{-nu}")
