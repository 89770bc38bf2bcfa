"""Special functions of conservative, linearly anisotropic slab transport.

lambda_fn and a_fn are closed forms. The X-function is evaluated from its
integral representation over x in [0, 1); H and the half-range weight gamma
follow from X at unit albedo.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Chebyshev

from .quad import (
    Quadrature,
    QuadratureError,
    integrate,
    integrate_endpoint_singular,
)

SQRT3 = math.sqrt(3.0)

# x_fn splits its integral here: ln(x + mu) is integrated analytically below
_SPLIT = 1e-3


def _arctanh(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * (np.log1p(x) - np.log1p(-x))


def lambda_fn(mu):
    """lambda(mu) = 1 - mu * arctanh(mu), for |mu| < 1."""
    mu = np.asarray(mu, dtype=float)
    if np.any(np.abs(mu) >= 1.0):
        raise ValueError("lambda_fn requires |mu| < 1 (arctanh diverges at 1)")
    out = 1.0 - mu * _arctanh(mu)
    return float(out) if out.ndim == 0 else out


def a_fn(mu):
    """A(mu) = -2 Q1(mu) / P1(mu) = 2 lambda(mu) / mu on 0 < mu < 1."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= 0.0) or np.any(mu >= 1.0):
        raise ValueError("a_fn requires 0 < mu < 1")
    out = 2.0 * np.asarray(lambda_fn(mu)) / mu
    return float(out) if out.ndim == 0 else out


def _check_albedo(c):
    if not 0.0 < c <= 1.0:
        raise ValueError(f"albedo must lie in (0, 1], got {c}")


def _require_conservative(c):
    if c != 1.0:
        raise ValueError("only c = 1 is supported here (conservative scattering)")


def _kernel_near_zero(x, c):
    """K(x) - 1 on small x, where K is the weight multiplying ln(x + mu)."""
    x = np.asarray(x, dtype=float)
    num = 1.0 + c * x * x / (1.0 - x * x)
    den = (1.0 - c * x * _arctanh(x)) ** 2 + (0.5 * math.pi * c * x) ** 2
    return (num - den) / den


def _kernel_t(t, c):
    """K(x) * (1 - x) with x = 1 - exp(-t), written without forming 1 - x."""
    t = np.asarray(t, dtype=float)
    x = -np.expm1(-t)
    atanh = 0.5 * (np.log1p(x) + t)
    num = (1.0 - (1.0 - c) * x * x) / (1.0 + x)
    den = (1.0 - c * x * atanh) ** 2 + (0.5 * math.pi * c * x) ** 2
    return x, num / den


def _log_integral_direct(mu, c, q: Quadrature):
    """I(mu) = int_0^1 K(x) ln(x + mu) dx for every mu in the 1-d array ``mu``."""
    mu = np.asarray(mu, dtype=float)
    d = _SPLIT
    # int_0^d ln(x + mu) dx in closed form; mu ln mu -> 0 at mu = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        mlogm = np.where(mu > 0, mu * np.log(np.where(mu > 0, mu, 1.0)), 0.0)
    head = (d + mu) * np.log(d + mu) - mlogm - d

    def corner(x):
        return _kernel_near_zero(x, c)[:, None] * np.log(x[:, None] + mu[None, :])

    # the corner integrand is O(x^2 ln x); ln(x + mu) never sees x + mu = 0 at nodes
    near = integrate(corner, 0.0, d, q)

    def body(t):
        x, k = _kernel_t(t, c)
        return k[:, None] * np.log(x[:, None] + mu[None, :])

    far = integrate_endpoint_singular(body, q, a=d, in_t=True)
    total = head + near.value + far.value
    err = near.error_estimate + far.error_estimate
    if not (near.converged and far.converged):
        raise QuadratureError(f"X-function quadrature did not converge (error estimate {err:.3g})")
    return total, err


def x_fn(mu, c: float = 1.0, q: Quadrature | None = None):
    """X(-mu) for 0 <= mu <= 1 at albedo ``c`` by direct quadrature."""
    _check_albedo(c)
    q = q or Quadrature()
    arr = np.atleast_1d(np.asarray(mu, dtype=float))
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("x_fn requires 0 <= mu <= 1")
    integral, _ = _log_integral_direct(arr, c, q)
    out = np.exp(-0.5 * c * integral)
    return float(out[0]) if np.ndim(mu) == 0 else out.reshape(np.shape(mu))


def h_fn(mu, c: float = 1.0, q: Quadrature | None = None):
    """Chandrasekhar H(mu) = sqrt(3) / X(-mu), valid in the conservative limit."""
    _require_conservative(c)
    return SQRT3 / np.asarray(x_fn(mu, c, q)) if np.ndim(mu) else SQRT3 / x_fn(mu, c, q)


def _clenshaw(coef, t):
    """Chebyshev series with per-point coefficient rows: coef (n, m), t (n,)."""
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for k in range(coef.shape[1] - 1, 0, -1):
        b1, b2 = coef[:, k] + 2.0 * t * b1 - b2, b1
    return coef[:, 0] + t * b1 - b2


@dataclass(frozen=True)
class XFunction:
    """Evaluator for X(-mu) at a fixed albedo.

    With ``cached=True`` a piecewise Chebyshev table is built eagerly. Panels
    are graded geometrically towards mu = 0, where X has a mu*ln(mu) corner
    that defeats a single global interpolant.
    """

    c: float = 1.0
    quad: Quadrature = field(default_factory=Quadrature)
    cached: bool = True
    levels: int = 32
    degree: int = 12
    _edges: np.ndarray = field(init=False, repr=False, compare=False)
    _coef: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_albedo(self.c)
        if not self.cached:
            return
        edges = np.concatenate([[0.0], 2.0 ** -np.arange(self.levels, -1, -1.0)])
        coef = np.empty((len(edges) - 1, self.degree + 1))
        for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
            series = Chebyshev.interpolate(self.direct, self.degree, domain=[lo, hi])
            coef[i] = series.coef
        object.__setattr__(self, "_edges", edges)
        object.__setattr__(self, "_coef", coef)

    def direct(self, mu):
        return x_fn(mu, self.c, self.quad)

    def __call__(self, mu):
        if not self.cached:
            return self.direct(mu)
        arr = np.asarray(mu, dtype=float).ravel()
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("X(-mu) is tabulated for 0 <= mu <= 1 only")
        edges = self._edges
        idx = np.clip(np.searchsorted(edges, arr, side="right") - 1, 0, len(edges) - 2)
        lo, hi = edges[idx], edges[idx + 1]
        t = (2.0 * arr - lo - hi) / (hi - lo)
        out = _clenshaw(self._coef[idx], t)
        return float(out[0]) if np.ndim(mu) == 0 else out.reshape(np.shape(mu))

    def h(self, mu):
        _require_conservative(self.c)
        return SQRT3 / np.asarray(self(mu)) if np.ndim(mu) else SQRT3 / self(mu)

    def gamma(self, mu):
        """Half-range weight gamma(mu) = (3/2) mu / X(-mu)."""
        _require_conservative(self.c)
        x = self(mu)
        return 1.5 * np.asarray(mu, dtype=float) / x if np.ndim(mu) else 1.5 * mu / x


_DEFAULT: XFunction | None = None


def default_xfunction() -> XFunction:
    """Shared cached evaluator at c = 1 (built on first use)."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = XFunction()
    return _DEFAULT


def gamma_fn(mu, xf: XFunction | None = None):
    """gamma(mu) = (3/2) mu / X(-mu) on [0, 1], c = 1."""
    xf = xf or default_xfunction()
    arr = np.asarray(mu, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("gamma_fn requires 0 <= mu <= 1")
    return xf.gamma(mu)


@dataclass(frozen=True)
class GammaMoments:
    """Zeroth and first moments of gamma; gamma1 is the extrapolation length z0."""

    gamma0: float
    gamma1: float
    error_estimate: float = 0.0

    @property
    def z0(self) -> float:
        return self.gamma1

    @property
    def mean_nu(self) -> float:
        return self.gamma1 / self.gamma0


def gamma_moments(xf: XFunction | None = None) -> GammaMoments:
    xf = xf or default_xfunction()
    _require_conservative(xf.c)
    q = xf.quad

    def both(mu):
        g = xf.gamma(mu)
        return np.stack([g, g * mu], axis=1)

    res = integrate(both, 0.0, 1.0, q)
    if not res.converged:
        raise QuadratureError("gamma moments did not converge")
    return GammaMoments(float(res.value[0]), float(res.value[1]), res.error_estimate)
