"""Monte Carlo oracle for the slab boundary-value problem.

Particles enter at z = 0 with direction cosine mu0 and random-walk in the
projected cosine mu with unit mean free path, scattering with density
(1 + 3 g1 mu mu') / 2 until they leave through z = 0 or z = D.

Reproducibility: particle i draws from its own splitmix64 stream keyed by
(seed, i), and particles are grouped into a fixed number of batches that each
own private tallies. Worker threads only decide which batch runs where, so
results are bit-identical for any worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numba as nb
import numpy as np

from .checks import Check
from .solver import AsymptoticSolution

MAX_COLLISIONS = 10**9
WORKERS_ENV = "THICKSLAB_WORKERS"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True, inline="always")
def _stream_key(seed, index):
    return _mix64(_mix64(np.uint64(seed)) ^ np.uint64(index))


@nb.njit(cache=True)
def splitmix64(state, n):
    """First ``n`` outputs of the splitmix64 generator started at ``state``."""
    out = np.empty(n, dtype=np.uint64)
    s = np.uint64(state)
    for k in range(n):
        s = s + _GOLDEN
        out[k] = _mix64(s)
    return out


@nb.njit(cache=True, inline="always")
def _uniform(state):
    """Advance a splitmix64 state; returns (new_state, u in [0, 1))."""
    state = state + _GOLDEN
    return state, float(_mix64(state) >> _S11) * _INV53


@nb.njit(cache=True, inline="always")
def _scatter(mu_prev, g1, u):
    a = g1 * mu_prev
    if a == 0.0:
        return 2.0 * u - 1.0
    # root of 3a mu^2 + 2 mu + (2 - 3a - 4u) = 0 in the cancellation-free form
    disc = 4.0 - 12.0 * a * (2.0 - 3.0 * a - 4.0 * u)
    if disc < 0.0:
        disc = 0.0
    mu = 2.0 * (4.0 * u + 3.0 * a - 2.0) / (2.0 + math.sqrt(disc))
    if mu > 1.0:
        return 1.0
    if mu < -1.0:
        return -1.0
    return mu


def sample_scatter(mu_prev: float, g1: float, u: float) -> float:
    """Outgoing cosine for incoming ``mu_prev`` by inverting the kernel CDF at ``u``.

    Solves (mu + 1)/2 + (3 g1 mu_prev / 4)(mu^2 - 1) = u on [-1, 1].
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must lie in [0, 1], got {u}")
    if abs(g1 * mu_prev) > 1.0 / 3.0 + 1e-15:
        raise ValueError("|g1 * mu_prev| > 1/3 makes the scattering density negative")
    return float(_scatter(float(mu_prev), float(g1), float(u)))


@nb.njit(cache=True)
def sample_scatter_many(mu_prev, g1, u):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        out[i] = _scatter(mu_prev, g1, u[i])
    return out


@nb.njit(cache=True, inline="always")
def _mu_bin(mu, mu_bins):
    k = int((mu + 1.0) * 0.5 * mu_bins)
    if k >= mu_bins:
        k = mu_bins - 1
    if k < 0:
        k = 0
    return k


@nb.njit(cache=True, inline="always")
def _track(z_a, z_b, mu, D, dz, z_bins, mk, track, current):
    """Add the flight from z_a to z_b (direction mu) to the track-length tallies."""
    lo = min(z_a, z_b)
    hi = max(z_a, z_b)
    amu = abs(mu)
    if amu == 0.0:
        return
    sgn = 1.0 if mu > 0.0 else -1.0
    i0 = int(lo / dz)
    i1 = int(hi / dz)
    if i1 >= z_bins:
        i1 = z_bins - 1
    if i0 >= z_bins:
        i0 = z_bins - 1
    for i in range(i0, i1 + 1):
        b_lo = i * dz
        b_hi = D if i == z_bins - 1 else b_lo + dz
        seg = min(hi, b_hi) - max(lo, b_lo)
        if seg > 0.0:
            track[i, mk] += seg / amu
            current[i] += seg * sgn


@nb.njit(cache=True, nogil=True)
def _run_batch(seed, first, count, D, g1, mu0, z_bins, mu_bins, max_coll,
               track, current, hist_t, hist_r, counts):
    """Transport particles first..first+count-1; counts = [transmitted, reflected, collisions, capped]."""
    dz = D / z_bins
    for p in range(first, first + count):
        state = _stream_key(seed, p)
        z = 0.0
        mu = mu0
        n_coll = 0
        while True:
            state, u = _uniform(state)
            s = -math.log(1.0 - u)
            z_new = z + mu * s
            mk = _mu_bin(mu, mu_bins)
            if z_new >= D:
                _track(z, D, mu, D, dz, z_bins, mk, track, current)
                counts[0] += 1
                hist_t[_mu_bin(2.0 * mu - 1.0, mu_bins)] += 1
                break
            if z_new < 0.0:
                _track(z, 0.0, mu, D, dz, z_bins, mk, track, current)
                counts[1] += 1
                hist_r[_mu_bin(-2.0 * mu - 1.0, mu_bins)] += 1
                break
            if mu == 0.0:
                # flight parallel to the faces: all of it lies in one depth bin
                i = min(int(z / dz), z_bins - 1)
                track[i, mk] += s
            else:
                _track(z, z_new, mu, D, dz, z_bins, mk, track, current)
            z = z_new
            n_coll += 1
            if n_coll >= max_coll:
                counts[3] += 1
                break
            state, u = _uniform(state)
            mu = _scatter(mu, g1, u)
        counts[2] += n_coll


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class McConfig:
    D: float
    g1: float = 0.0
    mu0: float = 1.0
    n_particles: int = 100_000
    seed: int = 0
    n_workers: int = field(default_factory=default_workers)
    z_bins: int = 40
    mu_bins: int = 20
    n_batches: int = 64

    def __post_init__(self):
        if not (self.D > 0 and math.isfinite(self.D)):
            raise ValueError(f"D must be positive, got {self.D}")
        if abs(self.g1) > 1.0 / 3.0:
            raise ValueError(
                f"|g1| = {abs(self.g1)} > 1/3: the kernel (1 + 3 g1 mu mu')/2 turns negative, "
                "so it cannot be sampled")
        if not 0.0 < self.mu0 <= 1.0:
            raise ValueError(f"mu0 must lie in (0, 1], got {self.mu0}")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.z_bins < 1 or self.mu_bins < 1 or self.n_batches < 1 or self.n_workers < 1:
            raise ValueError("bin, batch and worker counts must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class McResult:
    """Raw tallies of a run, all per batch so that batch-to-batch scatter gives errors.

    ``track[b, i, k]`` is the summed path length of batch ``b`` in depth bin
    ``i`` and cosine bin ``k``; ``current[b, i]`` the summed path length times
    mu. Exit histograms are binned in the outgoing cosine |mu| on [0, 1].
    """

    config: McConfig
    n_transmitted: int
    n_reflected: int
    n_collisions_total: int
    exit_hist_transmit: np.ndarray
    exit_hist_reflect: np.ndarray
    track: np.ndarray
    current: np.ndarray
    batch_sizes: np.ndarray

    @property
    def n_particles(self) -> int:
        return self.config.n_particles

    @property
    def transmitted_fraction(self) -> float:
        return self.n_transmitted / self.n_particles

    @property
    def reflected_fraction(self) -> float:
        return self.n_reflected / self.n_particles

    @property
    def transmitted_stderr(self) -> float:
        p = self.transmitted_fraction
        return math.sqrt(p * (1.0 - p) / self.n_particles)

    @property
    def reflected_stderr(self) -> float:
        return self.transmitted_stderr

    @property
    def z_edges(self) -> np.ndarray:
        return np.linspace(0.0, self.config.D, self.config.z_bins + 1)

    @property
    def mu_edges(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.config.mu_bins + 1)

    @property
    def exit_mu_edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.config.mu_bins + 1)

    def _norm(self, normalization: str) -> float:
        # per incident particle, or per the unit-amplitude beam 2 delta(mu - mu0)
        if normalization == "particle":
            return 1.0
        if normalization == "beam":
            return 2.0 * self.config.mu0
        raise ValueError("normalization must be 'particle' or 'beam'")

    def angular_density(self, normalization: str = "beam") -> np.ndarray:
        """Track-length estimate of f(z, mu) on the (z_bins, mu_bins) grid."""
        dz = self.config.D / self.config.z_bins
        dmu = 2.0 / self.config.mu_bins
        return self.track.sum(axis=0) * self._norm(normalization) / (dz * dmu * self.n_particles)

    def _batch_estimates(self, per_batch, normalization):
        """Batch means of a per-batch tally and the standard error of their weighted mean."""
        dz = self.config.D / self.config.z_bins
        w = self.batch_sizes.astype(float)
        used = w > 0
        est = per_batch[used] * self._norm(normalization) / (dz * w[used, None])
        mean = per_batch.sum(axis=0) * self._norm(normalization) / (dz * self.n_particles)
        nb_ = used.sum()
        if nb_ < 2:
            return mean, np.full_like(mean, np.nan)
        var = np.sum(w[used, None] * (est - mean) ** 2, axis=0) / (w[used].sum() * (nb_ - 1))
        return mean, np.sqrt(var)

    def scalar_density(self, normalization: str = "beam"):
        """(rho, stderr) per depth bin: the mu-integral of f."""
        return self._batch_estimates(self.track.sum(axis=2), normalization)

    def net_current(self, normalization: str = "beam"):
        """(J, stderr) per depth bin: the mu-weighted integral of f."""
        return self._batch_estimates(self.current, normalization)

    def summary(self) -> dict:
        return {
            "config": asdict(self.config),
            "transmitted_fraction": self.transmitted_fraction,
            "transmitted_stderr": self.transmitted_stderr,
            "reflected_fraction": self.reflected_fraction,
            "reflected_stderr": self.reflected_stderr,
            "n_transmitted": self.n_transmitted,
            "n_reflected": self.n_reflected,
            "n_collisions_total": self.n_collisions_total,
        }


class CollisionCapExceeded(RuntimeError):
    """A particle hit the collision cap; this indicates a defect, not physics."""


def _batch_bounds(n_particles, n_batches):
    n_batches = min(n_batches, n_particles)
    sizes = np.full(n_batches, n_particles // n_batches, dtype=np.int64)
    sizes[: n_particles % n_batches] += 1
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return starts, sizes


def run(config: McConfig, max_collisions: int = MAX_COLLISIONS) -> McResult:
    starts, sizes = _batch_bounds(config.n_particles, config.n_batches)
    nb_ = len(sizes)
    track = np.zeros((nb_, config.z_bins, config.mu_bins))
    current = np.zeros((nb_, config.z_bins))
    hist_t = np.zeros((nb_, config.mu_bins), dtype=np.int64)
    hist_r = np.zeros((nb_, config.mu_bins), dtype=np.int64)
    counts = np.zeros((nb_, 4), dtype=np.int64)

    def work(b):
        _run_batch(np.uint64(config.seed), int(starts[b]), int(sizes[b]), float(config.D),
                   float(config.g1), float(config.mu0), config.z_bins, config.mu_bins,
                   max_collisions, track[b], current[b], hist_t[b], hist_r[b], counts[b])

    if config.n_workers == 1:
        for b in range(nb_):
            work(b)
    else:
        with ThreadPoolExecutor(max_workers=config.n_workers) as pool:
            list(pool.map(work, range(nb_)))

    capped = int(counts[:, 3].sum())
    if capped:
        raise CollisionCapExceeded(f"{capped} particle(s) exceeded {max_collisions} collisions")
    return McResult(
        config=config,
        n_transmitted=int(counts[:, 0].sum()),
        n_reflected=int(counts[:, 1].sum()),
        n_collisions_total=int(counts[:, 2].sum()),
        exit_hist_transmit=hist_t.sum(axis=0),
        exit_hist_reflect=hist_r.sum(axis=0),
        track=track,
        current=current,
        batch_sizes=sizes,
    )


@dataclass
class ComparisonReport:
    checks: list[Check]
    notices: list[str]
    exit_hist_transmit: list[int]
    exit_hist_reflect: list[int]
    exit_mu_edges: list[float]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
            "notices": list(self.notices),
            "exit_hist_transmit": self.exit_hist_transmit,
            "exit_hist_reflect": self.exit_hist_reflect,
            "exit_mu_edges": self.exit_mu_edges,
        }


MIN_PROFILE_D = 7.0


def _fit_slope(x, y, w=None):
    coef = np.polyfit(x, y, 1, w=w)
    return coef[0], coef[1]


def compare(result: McResult, solution: AsymptoticSolution, *, transmission_tol: float = 0.005,
            slope_tol: float = 0.02, current_sigmas: float = 3.0,
            layer: float = 3.0) -> ComparisonReport:
    """Check a Monte Carlo run against the thick-slab asymptotic solution.

    The transmission check allows max(3 sigma, transmission_tol). Profile
    checks use depth bins whose centres lie at least ``layer`` from both faces
    and are skipped for slabs thinner than 7 mean free paths.
    """
    cfg, p = result.config, solution.problem
    if (cfg.D, cfg.g1, cfg.mu0) != (p.D, p.g1, p.mu0):
        raise ValueError("Monte Carlo run and analytic solution describe different slabs")

    checks: list[Check] = []
    notices: list[str] = []
    f_mc = result.transmitted_fraction
    expected = solution.transmitted_fraction
    tol = max(3.0 * result.transmitted_stderr, transmission_tol)
    checks.append(Check("transmission |F_MC - j/mu0|", f_mc, expected, tol,
                        bool(abs(f_mc - expected) <= tol),
                        f"stderr {result.transmitted_stderr:.3g}"))

    if cfg.D < MIN_PROFILE_D:
        notices.append(f"profile comparison skipped: D = {cfg.D} < {MIN_PROFILE_D}")
    else:
        centres = 0.5 * (result.z_edges[1:] + result.z_edges[:-1])
        inner = (centres >= layer) & (centres <= cfg.D - layer)
        if inner.sum() < 3:
            notices.append("profile comparison skipped: fewer than 3 interior depth bins")
        else:
            checks.extend(_profile_checks(result, solution, centres, inner,
                                          slope_tol, current_sigmas))

    return ComparisonReport(
        checks=checks,
        notices=notices,
        exit_hist_transmit=result.exit_hist_transmit.tolist(),
        exit_hist_reflect=result.exit_hist_reflect.tolist(),
        exit_mu_edges=result.exit_mu_edges.tolist(),
    )


def _batch_slope_sigma(result, inner, z):
    """Standard error of the fitted density slope from batch-to-batch scatter."""
    per_batch = result.track.sum(axis=2)[:, inner]
    sizes = result.batch_sizes.astype(float)
    if len(sizes) < 2:
        return float("inf")
    dz = result.config.D / result.config.z_bins
    rho_b = per_batch * result._norm("beam") / (dz * sizes[:, None])
    slopes = np.polyfit(z, rho_b.T, 1)[0]
    w = sizes / sizes.sum()
    mean = np.sum(w * slopes)
    var = np.sum(w * (slopes - mean) ** 2) / (len(sizes) - 1)
    return float(np.sqrt(var))


def _profile_checks(result, solution, centres, inner, slope_tol, current_sigmas):
    g1 = solution.problem.g1
    out = []
    rho, rho_err = result.scalar_density()
    z = centres[inner]
    analytic = 2.0 * solution.a_s - 6.0 * solution.j * z * (1.0 - g1)
    # plateau normalisation: match the mean level over the fit window first
    scale = analytic.mean() / rho[inner].mean()
    slope, _ = _fit_slope(z, scale * rho[inner])
    target = -6.0 * solution.j * (1.0 - g1)
    ratio = slope / target
    sigma = _batch_slope_sigma(result, inner, z) / abs(target)
    tol = max(slope_tol, 3.0 * sigma)
    out.append(Check("density slope ratio (measured/analytic)", float(ratio), 1.0, tol,
                     bool(abs(ratio - 1.0) <= tol),
                     f"plateau scale {scale:.6g}, statistical sigma {sigma:.2g}"))

    cur, cur_err = result.net_current()
    ci, ce = cur[inner], cur_err[inner]
    mean_j = float(np.average(ci, weights=1.0 / ce**2))
    dev = float(np.max(np.abs(ci - mean_j) / ce))
    out.append(Check("net current constancy (max |J_i - J|/sigma_i)", dev, 0.0, current_sigmas,
                     dev <= current_sigmas, f"mean J {mean_j:.6g} vs 2j {2 * solution.j:.6g}"))

    f = result.angular_density()
    mid = int(np.argmin(np.abs(centres - 0.5 * result.config.D)))
    mu_c = 0.5 * (result.mu_edges[1:] + result.mu_edges[:-1])
    mslope, _ = _fit_slope(mu_c, f[mid])
    mratio = mslope / (3.0 * solution.j)
    # angular linearity is a coarse check: one depth bin, finite mu bins
    out.append(Check("mid-slab angular slope ratio (measured/3j)", float(mratio), 1.0, 5 * slope_tol,
                     bool(abs(mratio - 1.0) <= 5 * slope_tol), f"depth bin centre {centres[mid]:.4g}"))
    return out
