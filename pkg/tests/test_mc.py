import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from oracles import scatter_cdf
from thickslab.mc import (
    McConfig,
    compare,
    run,
    sample_scatter,
    sample_scatter_many,
    splitmix64,
)
from thickslab.solver import SlabProblem, solve_thick


def test_sample_scatter_examples():
    assert sample_scatter(0.3, 0.0, 0.5) == 0.0
    assert sample_scatter(0.3, 0.0, 1.0) == 1.0
    assert sample_scatter(1.0, 1 / 3, 0.25) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("u", [-0.1, 1.1, math.nan])
def test_sample_scatter_bad_u(u):
    with pytest.raises(ValueError):
        sample_scatter(0.5, 0.0, u)


def test_sample_scatter_rejects_negative_density():
    with pytest.raises(ValueError):
        sample_scatter(1.0, 0.5, 0.5)


@settings(max_examples=200)
@given(mu_prev=st.floats(-1, 1), g1=st.floats(-1 / 3, 1 / 3), u=st.floats(0, 1))
def test_inverse_cdf_roundtrip(mu_prev, g1, u):
    mu = sample_scatter(mu_prev, g1, u)
    assert -1.0 <= mu <= 1.0
    assert scatter_cdf(mu, g1 * mu_prev) == pytest.approx(u, abs=1e-12)


@settings(max_examples=50)
@given(mu_prev=st.floats(-1, 1), g1=st.floats(-1 / 3, 1 / 3),
       u=st.floats(0, 1), v=st.floats(0, 1))
def test_inverse_cdf_monotone(mu_prev, g1, u, v):
    lo, hi = sorted((u, v))
    assert sample_scatter(mu_prev, g1, lo) <= sample_scatter(mu_prev, g1, hi)


def chi_square_p(g1, mu_prev, n, seed, bins=50):
    u = np.random.default_rng(seed).random(n)
    mu = sample_scatter_many(mu_prev, g1, u)
    edges = np.linspace(-1, 1, bins + 1)
    observed, _ = np.histogram(mu, edges)
    expected = n * np.diff(scatter_cdf(edges, g1 * mu_prev))
    return stats.chisquare(observed, expected).pvalue


@pytest.mark.parametrize("g1,mu_prev", [(0.0, 0.7), (1 / 3, 1.0), (-1 / 3, 0.5)])
def test_kernel_goodness_of_fit(g1, mu_prev):
    assert chi_square_p(g1, mu_prev, 200_000, seed=5) > 0.01


def test_goodness_of_fit_detects_wrong_kernel():
    # sampling with g1 = 1/3 but testing against isotropic must be rejected
    u = np.random.default_rng(1).random(200_000)
    observed, edges = np.histogram(sample_scatter_many(1.0, 1 / 3, u), np.linspace(-1, 1, 51))
    assert stats.chisquare(observed, np.full(50, 4000.0)).pvalue < 1e-6


def test_splitmix64_reference():
    assert int(splitmix64(np.uint64(0), 1)[0]) == 0xE220A8397B1DCDAF


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(D=0), dict(D=math.nan), dict(D=5, g1=0.4),
                                    dict(D=5, mu0=0), dict(D=5, n_particles=0),
                                    dict(D=5, seed=-1), dict(D=5, n_workers=0),
                                    dict(D=5, z_bins=0)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            McConfig(**kw)

    def test_g1_message(self):
        with pytest.raises(ValueError, match="negative"):
            McConfig(D=5, g1=-0.5)

    def test_workers_env(self, monkeypatch):
        monkeypatch.setenv("THICKSLAB_WORKERS", "3")
        assert McConfig(D=1.0).n_workers == 3


def test_empty_slab_transmits_everything():
    for g1 in (-1 / 3, 0.0, 0.2):
        r = run(McConfig(D=1e-9, g1=g1, mu0=0.5, n_particles=20_000, seed=3, n_workers=1))
        assert r.transmitted_fraction > 0.9999
        assert r.n_transmitted + r.n_reflected == 20_000


def test_conservation_and_counts():
    r = run(McConfig(D=4.0, g1=0.2, mu0=0.7, n_particles=30_000, seed=9, n_workers=1))
    assert r.n_transmitted + r.n_reflected == r.n_particles
    assert r.transmitted_fraction + r.reflected_fraction == pytest.approx(1.0, abs=1e-15)
    assert r.exit_hist_transmit.sum() == r.n_transmitted
    assert r.exit_hist_reflect.sum() == r.n_reflected
    assert r.batch_sizes.sum() == r.n_particles
    assert r.n_collisions_total > 0
    assert r.track.shape == (64, 40, 20) and np.all(r.track >= 0)


def test_net_current_constant():
    # every transmitted particle crosses each depth bin with net displacement dz,
    # a reflected one with zero: the tallied J equals 2 mu0 F_T at all depths
    r = run(McConfig(D=8.0, n_particles=20_000, seed=2, n_workers=1))
    J, _ = r.net_current()
    assert np.allclose(J, 2.0 * r.transmitted_fraction, rtol=1e-9)


def test_track_length_normalization():
    # total track length equals the sum of all free paths travelled inside
    r = run(McConfig(D=1e-6, mu0=1.0, n_particles=1000, seed=1, n_workers=1))
    assert r.track.sum() == pytest.approx(1000 * 1e-6, rel=1e-9)
    f = r.angular_density("particle")
    assert f.shape == (40, 20)
    with pytest.raises(ValueError):
        r.angular_density("bogus")


def test_determinism_across_workers():
    cfg = dict(D=6.0, g1=0.1, mu0=0.8, n_particles=20_000, seed=77)
    a = run(McConfig(n_workers=1, **cfg))
    b = run(McConfig(n_workers=4, **cfg))
    c = run(McConfig(n_workers=1, **cfg))
    for x in (b, c):
        assert x.n_transmitted == a.n_transmitted
        assert x.n_collisions_total == a.n_collisions_total
        assert a.track.tobytes() == x.track.tobytes()
        assert a.current.tobytes() == x.current.tobytes()
    other = run(McConfig(n_workers=1, **{**cfg, "seed": 78}))
    assert other.track.tobytes() != a.track.tobytes()


def test_particle_streams_independent_of_batching():
    cfg = dict(D=3.0, n_particles=5000, seed=4, n_workers=1)
    a = run(McConfig(n_batches=1, **cfg))
    b = run(McConfig(n_batches=7, **cfg))
    assert a.n_transmitted == b.n_transmitted
    assert a.n_collisions_total == b.n_collisions_total
    assert a.track.sum(axis=0) == pytest.approx(b.track.sum(axis=0), rel=1e-12)


def test_transmission_against_analytic_small():
    s = solve_thick(SlabProblem(10.0))
    r = run(McConfig(D=10.0, n_particles=100_000, seed=21, n_workers=1))
    assert abs(r.transmitted_fraction - s.transmitted_fraction) <= max(
        3 * r.transmitted_stderr, 0.005)


def test_compare_report():
    s = solve_thick(SlabProblem(10.0))
    r = run(McConfig(D=10.0, n_particles=50_000, seed=8, n_workers=1))
    rep = compare(r, s)
    names = [c.name for c in rep.checks]
    assert names[0].startswith("transmission")
    assert any("slope" in n for n in names) and any("current" in n for n in names)
    d = rep.to_dict()
    assert d["passed"] == rep.passed and len(d["exit_hist_transmit"]) == 20


def test_compare_skips_profile_for_thin_slab():
    import warnings

    from thickslab.solver import ThinSlabWarning

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ThinSlabWarning)
        s = solve_thick(SlabProblem(5.0))
    r = run(McConfig(D=5.0, n_particles=5000, seed=1, n_workers=1))
    rep = compare(r, s)
    assert len(rep.checks) == 1
    assert any("skipped" in n for n in rep.notices)


def test_compare_mismatched_slab():
    s = solve_thick(SlabProblem(10.0))
    r = run(McConfig(D=9.0, n_particles=100, seed=1, n_workers=1))
    with pytest.raises(ValueError):
        compare(r, s)
