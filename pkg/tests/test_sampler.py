import math

import numpy as np
import pytest

from gmchaos import geometry, sampler

LN2 = math.log(2.0)


def test_grid_spec_validation():
    assert sampler.GridSpec(8).log2_size == 3
    for bad in (0, 1, 3, 100, -8):
        with pytest.raises(ValueError):
            sampler.GridSpec(bad)


def test_covariance_sequence_entries():
    seq = sampler.covariance_sequence(1, sampler.GridSpec(8))
    assert seq.size == 16
    assert seq[0] == pytest.approx(LN2, abs=1e-15)
    assert seq[8] == 0.0  # lag 1.0, beyond the level-1 support
    seq2 = sampler.covariance_sequence(2, sampler.GridSpec(16))
    assert seq2[3] == pytest.approx(LN2 - 0.375, abs=1e-12)  # lag 3/16
    # periodization symmetry
    assert np.array_equal(seq2[1:], seq2[1:][::-1])


def test_embedding_spectrum_constant_sequence():
    spec = sampler.embedding_spectrum(np.full(16, 0.7))
    assert spec.eigenvalues[0] == pytest.approx(16 * 0.7, rel=1e-12)
    assert np.max(np.abs(spec.eigenvalues[1:])) < 1e-12


@pytest.mark.parametrize("j,size", [(0, 64), (3, 256), (5, 1024)])
def test_embedding_psd(j, size):
    seq = sampler.covariance_sequence(j, sampler.GridSpec(size))
    spec = sampler.embedding_spectrum(seq, level=j)
    assert np.all(spec.eigenvalues >= 0.0)
    assert spec.period_points == 2 * size


def test_embedding_rejects_non_psd():
    with pytest.raises(sampler.NotEmbeddableError):
        sampler.embedding_spectrum(np.array([0.0, 1.0, 0.0, 1.0]))


def test_embedding_shape_checks():
    with pytest.raises(ValueError):
        sampler.embedding_spectrum(np.ones(7))  # odd length
    with pytest.raises(ValueError):
        sampler.embedding_spectrum(np.array([1.0, 0.5, 0.2, 0.4]))  # asymmetric


def test_embedding_implied_covariance_matches_closed_form():
    for size in (16, 64):
        grid = sampler.GridSpec(size)
        for j in range(5):
            seq = sampler.covariance_sequence(j, grid)
            spec = sampler.embedding_spectrum(seq, level=j)
            implied = np.fft.ifft(spec.eigenvalues).real
            assert np.max(np.abs(implied - seq)) < 1e-10
            # matrix form against the closed form on the grid
            t = grid.times()
            mat = geometry.level_covariance(j, np.abs(t[:, None] - t[None, :]))
            idx = np.abs(np.arange(size)[:, None] - np.arange(size)[None, :])
            assert np.max(np.abs(implied[idx] - mat)) < 1e-10


def test_determinism_and_stream_separation():
    grid = sampler.GridSpec(64)
    a = sampler.sample_hierarchy(4, grid, seed=9, replica=2)
    b = sampler.sample_hierarchy(4, grid, seed=9, replica=2)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, sampler.sample_hierarchy(4, grid, 9, 3).samples)
    assert not np.array_equal(a.samples, sampler.sample_hierarchy(4, grid, 10, 2).samples)
    # rows are read-only
    with pytest.raises(ValueError):
        a.samples[0, 0] = 1.0


def test_hierarchy_variance_record():
    grid = sampler.GridSpec(32)
    h = sampler.sample_hierarchy(3, grid, seed=0)
    assert h.variances[0] == 1.0
    assert np.allclose(h.variances[1:], LN2)
    with pytest.raises(ValueError):
        h.level(4)


def test_empirical_variance_level0():
    # fixed grid point across many replicas; level-0 variance is 1
    grid = sampler.GridSpec(8)
    n = 10**5
    values = np.array([sampler.sample_level(0, grid, seed=77, replica=r)[3] for r in range(n)])
    assert abs(values.var() - 1.0) < 0.02


def test_empirical_covariance_level2():
    # lag 0.2 on a 64-point grid, 4000 replicas, averaged over positions
    grid = sampler.GridSpec(64)
    lag_pts = 13  # 13/64 ~ 0.203
    theo = geometry.level_covariance(2, lag_pts / 64)
    acc = 0.0
    n = 4000
    for r in range(n):
        row = sampler.sample_level(2, grid, seed=5, replica=r)
        acc += row[:-lag_pts] @ row[lag_pts:] / (64 - lag_pts)
    assert abs(acc / n - theo) < 0.015


def test_dense_sampler_matches_law():
    # same closed-form covariance through the dense factorization path
    grid = sampler.GridSpec(64)
    lag_pts = 13
    theo = geometry.level_covariance(2, lag_pts / 64)
    acc = 0.0
    n = 4000
    for r in range(n):
        row = sampler.sample_level_dense(2, grid, seed=6, replica=r)
        acc += row[:-lag_pts] @ row[lag_pts:] / (64 - lag_pts)
    assert abs(acc / n - theo) < 0.015
    with pytest.raises(ValueError):
        sampler.sample_level_dense(1, sampler.GridSpec(1024), seed=0)


def test_long_range_decoupling_on_grid():
    grid = sampler.GridSpec(256)
    t = grid.times()
    for j in (2, 3, 4):
        gap = t[None, :] - t[:, None]
        far = np.abs(gap) >= 2.0 ** (-(j - 1))
        cov = geometry.level_covariance(j, np.abs(gap))
        assert np.all(cov[far] == 0.0)


def test_binary_dump_round_trip(tmp_path):
    grid = sampler.GridSpec(32)
    h = sampler.sample_hierarchy(3, grid, seed=123, replica=4)
    path = tmp_path / "hierarchy.bin"
    sampler.write_hierarchy(h, path)
    back = sampler.read_hierarchy(path)
    assert back.grid == h.grid
    assert back.depth == h.depth
    assert back.seed == h.seed
    assert back.replica == h.replica
    assert np.array_equal(back.samples, h.samples)
    # header is 4 little-endian int64 + row-major float64 payload
    raw = path.read_bytes()
    assert len(raw) == 32 + 4 * 32 * 8
