import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from semilogconcave import model as M
from semilogconcave.rng import NoiseSource, child_generator, trajectory_key
from semilogconcave.sde import (BLOWUP, IntegratorConfig, couple, couple_independent, couple_reflection,
                                couple_reflection_general, couple_synchronous, load_batch, save_batch,
                                simulate, simulate_mckean, snap_times)


def test_noise_is_standard_normal():
    z = NoiseSource(7, np.arange(2000), 2).next(5).ravel()
    assert abs(z.mean()) < 0.03
    assert abs(z.std() - 1) < 0.03
    assert stats.kstest(z, "norm").pvalue > 1e-3


def test_noise_independent_of_partition():
    whole = NoiseSource(3, np.arange(10), 2).next(7)
    part = NoiseSource(3, np.arange(4, 10), 2)
    a = part.next(3)
    b = part.next(4)
    np.testing.assert_array_equal(np.concatenate([a, b])[:, :, :], whole[:, 4:, :])


def test_streams_differ():
    a = NoiseSource(3, [0], 1, stream=0).next(4)
    b = NoiseSource(3, [0], 1, stream=1).next(4)
    assert not np.array_equal(a, b)


def test_trajectory_key_bounds():
    with pytest.raises(ValueError):
        trajectory_key(0, 0, 2**32)
    assert trajectory_key(5, 1, 3) == [5, (1 << 32) | 3]


def test_child_generator_reproducible():
    np.testing.assert_array_equal(child_generator(1, 2).normal(size=3), child_generator(1, 2).normal(size=3))


@pytest.mark.parametrize("kw", [dict(h=0.0, T=1.0, N=1), dict(h=2.0, T=1.0, N=1), dict(h=0.1, T=1.0, N=0),
                                dict(h=0.1, T=1.0, N=1, scheme="milstein")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        IntegratorConfig(**kw)


def test_snap_times_records_snapping():
    cfg = IntegratorConfig(h=0.1, T=1.0, N=1)
    idx, snapped, was = snap_times([0.0, 0.5, 0.73], cfg)
    np.testing.assert_array_equal(idx, [0, 5, 7])
    np.testing.assert_allclose(snapped, [0.0, 0.5, 0.7])
    assert was
    with pytest.raises(ValueError):
        snap_times([1.5], cfg)
    with pytest.raises(ValueError):
        snap_times([], cfg)


def test_brownian_moments():
    cfg = IntegratorConfig(h=0.01, T=1.0, N=20000, seed=1)
    b = simulate(M.brownian_spec(1), [0.0], cfg, [1.0])
    x = b.cloud(0).points[:, 0]
    assert abs(x.mean()) < 4 / math.sqrt(20000)
    assert x.var() == pytest.approx(1.0, abs=0.04)


def test_ou_em_recursion_exact():
    """EM for b = -x/2 is X_{k+1} = (1 - h/2) X_k + sqrt(h) xi_k."""
    spec = M.ou_spec(1.0)
    cfg = IntegratorConfig(h=0.1, T=0.5, N=3, seed=5)
    b = simulate(spec, [1.0], cfg, [0.5])
    xi = NoiseSource(5, np.arange(3), 1).next(5)
    x = np.ones((3, 1))
    for k in range(5):
        x = x * (1 - 0.05) + math.sqrt(0.1) * xi[k]
    np.testing.assert_allclose(b.paths[:, -1, :], x, rtol=1e-14)


def test_results_independent_of_workers_and_chunks():
    spec = M.gradient_diffusion(M.double_well(), 2)
    base = IntegratorConfig(h=0.01, T=0.5, N=300, seed=9)
    a = simulate(spec, [0.5, -0.5], base, [0.25, 0.5])
    b = simulate(spec, [0.5, -0.5], IntegratorConfig(h=0.01, T=0.5, N=300, seed=9, chunk_size=37, workers=4),
                 [0.25, 0.5])
    np.testing.assert_array_equal(a.paths, b.paths)


def test_blowup_freezes_and_flags():
    spec = M.gradient_diffusion(M.make_potential("polynomial", {"terms": [([4], -1.0)]}), 1)
    cfg = IntegratorConfig(h=0.1, T=2.0, N=4, seed=0)
    b = simulate(spec, [5.0], cfg, [0.0, 1.0, 2.0])
    assert b.blown_up.all()
    assert np.isnan(b.paths[:, -1, 0]).all()
    assert b.attrition == 1.0
    assert BLOWUP == 1e12


def test_sampler_initial_condition():
    spec = M.ou_spec(2.0, 2)
    cfg = IntegratorConfig(h=0.1, T=0.1, N=50, seed=2)
    b = simulate(spec, lambda rng, n: rng.normal(size=(n, 2)), cfg, [0.0])
    assert b.paths.shape == (50, 1, 2)
    b2 = simulate(spec, lambda rng, n: rng.normal(size=(n, 2)), cfg, [0.0])
    np.testing.assert_array_equal(b.paths, b2.paths)


def test_synchronous_ou_distance_deterministic():
    spec = M.ou_spec(2.0)
    cfg = IntegratorConfig(h=1e-2, T=1.0, N=20, seed=4)
    b = couple_synchronous(spec, [1.0], [0.0], cfg, [0.5, 1.0])
    np.testing.assert_allclose(b.distances(), np.tile([(1 - 1e-2) ** 50, (1 - 1e-2) ** 100], (20, 1)), rtol=1e-12)
    assert np.isinf(b.coupling_time).all()


def test_independent_coupling_uses_other_stream():
    spec = M.brownian_spec(1)
    cfg = IntegratorConfig(h=0.1, T=1.0, N=500, seed=4)
    b = couple_independent(spec, [0.0], [0.0], cfg, [1.0])
    corr = np.corrcoef(b.x[:, 0, 0], b.y[:, 0, 0])[0, 1]
    assert abs(corr) < 0.15


def test_reflection_marginal_preserved():
    spec = M.ou_spec(1.0)
    cfg = IntegratorConfig(h=1e-2, T=1.0, N=4000, seed=8)
    refl = couple_reflection(spec, [1.0], [-1.0], cfg, [1.0])
    fresh = simulate(spec, [-1.0], IntegratorConfig(h=1e-2, T=1.0, N=4000, seed=99), [1.0])
    assert stats.ks_2samp(refl.y[:, 0, 0], fresh.paths[:, 0, 0]).pvalue > 0.01


def test_reflection_glues_after_coupling():
    spec = M.brownian_spec(2)
    cfg = IntegratorConfig(h=1e-2, T=3.0, N=500, seed=3)
    b = couple_reflection(spec, [0.2, 0.0], [-0.2, 0.0], cfg, [1.0, 3.0])
    met = b.coupling_time <= 1.0
    assert met.any()
    np.testing.assert_array_equal(b.x[met, 0], b.y[met, 0])
    np.testing.assert_array_equal(b.x[met, 1], b.y[met, 1])


def test_reflection_requires_distinct_points_and_identity():
    spec = M.brownian_spec(1)
    cfg = IntegratorConfig(h=0.1, T=1.0, N=2)
    with pytest.raises(ValueError, match="x0 != y0"):
        couple_reflection(spec, [0.0], [0.0], cfg, [1.0])
    scaled = M.gradient_diffusion(M.quadratic(1.0), 1, sigma_scale=2.0)
    with pytest.raises(ValueError, match="sigma = Id"):
        couple_reflection(scaled, [0.0], [1.0], cfg, [1.0])


def test_reflection_general_records_flags_and_marginal():
    spec = M.gradient_diffusion(M.quadratic(0.5), 1, sigma_scale=2.0)
    cfg = IntegratorConfig(h=1e-2, T=1.0, N=3000, seed=6)
    b = couple_reflection_general(spec, [1.0], [-1.0], cfg, [1.0])
    assert b.flags["positivity"]
    assert b.flags["M"] == 4.0
    fresh = simulate(spec, [-1.0], IntegratorConfig(h=1e-2, T=1.0, N=3000, seed=77), [1.0])
    assert stats.ks_2samp(b.y[:, 0, 0], fresh.paths[:, 0, 0]).pvalue > 0.01


def test_couple_dispatch_unknown():
    with pytest.raises(ValueError, match="scheme"):
        couple(M.brownian_spec(1), [0.0], [1.0], IntegratorConfig(h=0.1, T=1.0, N=1), [1.0], scheme="maximal")


def test_mckean_paired_clouds_share_noise():
    ms = M.builtin_mckean(M.quadratic(1.0), M.quadratic(0.25), 1)
    cfg = IntegratorConfig(h=1e-2, T=0.5, N=200, seed=1)
    a, b = simulate_mckean(ms, lambda g, n: g.normal(size=(n, 1)) + 1, cfg, [0.0, 0.5],
                           init_sampler2=lambda g, n: g.normal(size=(n, 1)) - 1)
    # shared noise and linear drift: centred particle differences shrink by (1 - h (1 + 1/4)) per step
    d0 = b[0].points - a[0].points
    d1 = b[1].points - a[1].points
    ratio = (d1 - d1.mean()) / (d0 - d0.mean())
    np.testing.assert_allclose(ratio, (1 - 1e-2 * 1.25) ** 50, rtol=1e-9)
    with pytest.raises(ValueError):
        simulate_mckean(ms, [0.0], IntegratorConfig(h=0.1, T=1.0, N=1), [1.0])


def test_mckean_mean_decays_to_zero():
    ms = M.builtin_mckean(M.quadratic(1.0), M.zero_potential(), 1)
    cfg = IntegratorConfig(h=1e-2, T=2.0, N=2000, seed=1)
    clouds = simulate_mckean(ms, lambda g, n: g.normal(size=(n, 1)) + 3, cfg, [2.0])
    # mean follows m' = -m
    assert clouds[0].points.mean() == pytest.approx(3 * math.exp(-2.0), abs=0.06)


@pytest.mark.parametrize("suffix", ["csv", "npz"])
@pytest.mark.parametrize("kind", ["trajectory", "coupled"])
def test_snapshot_roundtrip(tmp_path, suffix, kind):
    spec = M.ou_spec(1.0, 2)
    cfg = IntegratorConfig(h=0.1, T=1.0, N=5, seed=3)
    if kind == "trajectory":
        b = simulate(spec, [1.0, 0.0], cfg, [0.5, 1.0])
    else:
        b = couple_reflection(spec, [1.0, 0.0], [-1.0, 0.0], cfg, [0.5, 1.0])
    path = tmp_path / f"snap.{suffix}"
    save_batch(b, path)
    back = load_batch(path)
    assert type(back) is type(b)
    np.testing.assert_array_equal(back.times, b.times)
    np.testing.assert_array_equal(back.blown_up, b.blown_up)
    if kind == "trajectory":
        np.testing.assert_array_equal(back.paths, b.paths)
    else:
        np.testing.assert_array_equal(back.x, b.x)
        np.testing.assert_array_equal(back.y, b.y)
        np.testing.assert_array_equal(back.coupling_time, b.coupling_time)


def test_load_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        load_batch(p)


@settings(max_examples=25, deadline=None)
@given(K=st.floats(0.1, 4.0), dx=st.floats(0.1, 3.0), seed=st.integers(0, 2**32))
def test_synchronous_contraction_property(K, dx, seed):
    """Under a K-convex gradient drift the synchronous distance never increases."""
    spec = M.ou_spec(K)
    cfg = IntegratorConfig(h=0.05, T=1.0, N=4, seed=seed)
    b = couple_synchronous(spec, [dx], [0.0], cfg, [0.0, 0.5, 1.0])
    d = b.distances()
    assert np.all(np.diff(d, axis=1) <= 1e-12)
