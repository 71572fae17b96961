import math

import numpy as np
import pytest

from gmchaos import measure, sampler, spectral


@pytest.fixture(scope="module")
def hierarchy():
    return sampler.sample_hierarchy(6, sampler.GridSpec(1024), seed=17, replica=0)


def _uniform_density(size=256):
    h = sampler.sample_hierarchy(2, sampler.GridSpec(size), seed=0)
    return measure.chaos_density(h, 0.0)


def test_uniform_density_has_zero_coefficients():
    spec = spectral.fourier_coefficients(_uniform_density(), 16)
    assert np.max(np.abs(spec.coefficients)) < 1e-12


def test_band_limited_exactness():
    grid = sampler.GridSpec(256)
    base = _uniform_density()
    values = 1.0 + np.cos(2 * np.pi * grid.times())
    density = measure.ChaosDensity(
        grid=grid, gamma=0.0, depth=0, values=values, seed=0, replica=0
    )
    spec = spectral.fourier_coefficients(density, 8)
    assert spec.coefficients[0] == pytest.approx(0.5, abs=1e-13)
    assert np.max(np.abs(spec.coefficients[1:])) < 1e-13
    assert base.grid == grid


def test_nyquist_guard():
    with pytest.raises(ValueError):
        spectral.fourier_coefficients(_uniform_density(256), 33)  # above 256/8


def test_martingale_vector_weighting():
    spec = spectral.fourier_coefficients(_uniform_density(), 16)
    same = spectral.martingale_vector(spec, 0.0)
    assert np.array_equal(same.weighted, spec.coefficients)
    weighted = spectral.martingale_vector(spec, 0.5)
    assert weighted.weighted[3] == pytest.approx(4**0.25 * spec.coefficients[3], abs=1e-18)
    assert math.isclose(4**0.25, math.sqrt(2.0))
    with pytest.raises(ValueError):
        spectral.martingale_vector(spec, 1.0)


def test_weighted_modulus_invariant(hierarchy):
    spec = spectral.fourier_coefficients(measure.chaos_density(hierarchy, 0.5), 64)
    vec = spectral.martingale_vector(spec, 0.7)
    n = np.arange(1, 65)
    assert np.allclose(np.abs(vec.weighted), n**0.35 * np.abs(spec.coefficients), rtol=1e-12)


def test_dyadic_family_odd_even():
    odd = spectral.dyadic_family(2, "odd")
    assert [(i.left, i.right) for i in odd] == [(0.0, 0.25), (0.5, 0.75)]
    all_two = spectral.dyadic_family(1)
    assert [(i.left, i.right) for i in all_two] == [(0.0, 0.5), (0.5, 1.0)]
    odd2 = spectral.dyadic_family(2, "odd")
    even2 = spectral.dyadic_family(2, "even")
    merged = sorted(odd2 + even2, key=lambda i: i.index)
    assert merged == spectral.dyadic_family(2)
    with pytest.raises(ValueError):
        spectral.dyadic_family(2, "prime")


def test_dyadic_interval_grid_alignment():
    interval = spectral.DyadicInterval(3, 5)
    assert interval.grid_slice(sampler.GridSpec(64)) == (32, 40)
    assert interval.parity == "odd"
    with pytest.raises(ValueError):
        spectral.DyadicInterval(2, 5)
    with pytest.raises(ValueError):
        spectral.DyadicInterval(9, 1).grid_slice(sampler.GridSpec(64))


def test_localized_vector_degenerate(hierarchy):
    vec = spectral.localized_vector(hierarchy, 0.0, spectral.DyadicInterval(2, 1), 0.5, 32)
    assert np.array_equal(vec.values, np.zeros(32, dtype=complex))


def test_localized_vector_against_direct_sum(hierarchy):
    gamma, tau = 0.5, 0.3
    interval = spectral.DyadicInterval(2, 3)
    vec = spectral.localized_vector(hierarchy, gamma, interval, tau, 16)
    grid = hierarchy.grid
    t = grid.times()
    prefix = np.ones(grid.size)
    for j in range(3):
        prefix = prefix * measure.weight_field(hierarchy, j, gamma)
    core = prefix * (measure.weight_field(hierarchy, 3, gamma) - 1.0)
    i_lo, i_hi = interval.grid_slice(grid)
    for n in (1, 7, 16):
        direct = n ** (tau / 2) * np.sum(
            core[i_lo:i_hi] * np.exp(-2j * np.pi * n * t[i_lo:i_hi])
        ) / grid.size
        assert abs(vec.values[n - 1] - direct) < 1e-12


def test_localized_requires_deep_enough_hierarchy(hierarchy):
    with pytest.raises(ValueError):
        spectral.localized_vector(hierarchy, 0.5, spectral.DyadicInterval(6, 1), 0.3, 16)
    with pytest.raises(ValueError):
        spectral.localized_vector(hierarchy, 0.5, spectral.DyadicInterval(2, 1), 0.3, 1024)


def test_increment_decomposition(hierarchy):
    gamma, tau, n_max = 0.5, 0.4, 64
    for k in range(1, 7):
        low = spectral.martingale_vector(
            spectral.fourier_coefficients(measure.chaos_density(hierarchy, gamma, k - 1), n_max),
            tau,
        )
        high = spectral.martingale_vector(
            spectral.fourier_coefficients(measure.chaos_density(hierarchy, gamma, k), n_max),
            tau,
        )
        total = np.zeros(n_max, dtype=complex)
        for interval in spectral.dyadic_family(k - 1):
            total += spectral.localized_vector(hierarchy, gamma, interval, tau, n_max).values
        assert np.max(np.abs(total - (high.weighted - low.weighted))) < 1e-10


def test_same_parity_intervals_decouple():
    # distance between same-parity intervals is at least one interval length,
    # beyond the level-k covariance support
    from gmchaos import geometry

    k = 4
    grid = sampler.GridSpec(256)
    t = grid.times()
    for family in ("odd", "even"):
        intervals = spectral.dyadic_family(k - 1, family)
        for a, b in zip(intervals, intervals[1:]):
            sl_a = slice(*a.grid_slice(grid))
            sl_b = slice(*b.grid_slice(grid))
            gaps = np.abs(t[sl_b][None, :] - t[sl_a][:, None])
            assert np.all(geometry.level_covariance(k, gaps) == 0.0)


def test_lq_norm_examples():
    assert spectral.lq_norm(np.array([3.0, 4.0, 0.0]), 2) == pytest.approx(5.0)
    assert spectral.lq_norm(np.array([3.0, 4.0]), 1) == pytest.approx(7.0)
    vec = np.array([1.0 + 1j, -2.0, 0.5])
    assert spectral.lq_norm(3.0 * vec, 2.5) == pytest.approx(3.0 * spectral.lq_norm(vec, 2.5))
    with pytest.raises(ValueError):
        spectral.lq_norm(vec, 0.5)


def test_product_difference_identity():
    gen = np.random.default_rng(42)
    for _ in range(100):
        size = int(gen.integers(1, 10))
        a = gen.standard_normal(size) + 1j * gen.standard_normal(size)
        b = gen.standard_normal(size) + 1j * gen.standard_normal(size)
        expansion = spectral.product_difference_expansion(a, b)
        assert abs(expansion - (np.prod(a) - np.prod(b))) < 1e-12


def test_product_difference_two_terms():
    a = np.array([2.0, 5.0])
    b = np.array([3.0, 7.0])
    # (a0 - b0) a1 + b0 (a1 - b1) telescopes to a0 a1 - b0 b1
    assert spectral.product_difference_expansion(a, b) == pytest.approx(10.0 - 21.0)


def test_segment_integral():
    assert spectral.segment_integral(0.0, 1.0, 3) == pytest.approx(0.0, abs=1e-15)
    assert spectral.segment_integral(0.0, 0.5, 0) == pytest.approx(0.5)
    value = spectral.segment_integral(0.2, 0.3, 2)
    brute = np.trapezoid(
        np.exp(-2j * np.pi * 2 * np.linspace(0.2, 0.3, 20001)), dx=0.1 / 20000
    )
    assert abs(value - brute) < 1e-9


def test_abel_identity_randomized():
    gen = np.random.default_rng(7)
    for _ in range(100):
        level = int(gen.integers(0, 7))
        k = int(gen.integers(0, 4))
        family = spectral.dyadic_family(k)
        interval = family[int(gen.integers(0, len(family)))]
        values = gen.standard_normal(2**level + 1) + 1j * gen.standard_normal(2**level + 1)
        n = int(gen.integers(1, 700))
        direct, abel = spectral.abel_segment_transform(values, interval, n)
        assert abs(direct - abel) < 1e-12


def test_abel_constant_values_full_oscillation():
    direct, abel = spectral.abel_segment_transform(np.full(5, 3.7), (0.0, 0.5), 2)
    assert abs(direct) < 1e-15
    assert abs(abel) < 1e-15


def test_abel_two_segment_hand_expansion():
    values = np.array([1.0, 2.0, 123.0])  # last node value never enters
    interval = (0.0, 0.5)
    n = 3
    direct, abel = spectral.abel_segment_transform(values, interval, n)
    hand = values[0] * spectral.segment_integral(0.0, 0.25, n) + values[1] * spectral.segment_integral(0.25, 0.5, n)
    assert abs(direct - hand) < 1e-15
    assert abs(abel - hand) < 1e-13


def test_abel_node_count_validation():
    with pytest.raises(ValueError):
        spectral.abel_segment_transform(np.ones(4), (0.0, 1.0), 1)


def test_separation_bound_degenerate(hierarchy):
    comp = spectral.separation_bound(hierarchy, 0.0, spectral.DyadicInterval(2, 2), 0.4, 3)
    assert np.all(comp.residual_masses == 0.0)
    assert np.all(comp.increment_sums == 0.0)
    assert comp.all_satisfied


def test_separation_bound_holds_pathwise(hierarchy):
    comp = spectral.separation_bound(hierarchy, 0.5, spectral.DyadicInterval(2, 3), 0.4, 4)
    assert comp.all_satisfied
    assert comp.localized_abs.shape == comp.bound.shape


def test_separation_weight_supports(hierarchy):
    comp = spectral.separation_bound(hierarchy, 0.5, spectral.DyadicInterval(2, 1), 0.6, 3)
    k = comp.level_k
    n = comp.n
    assert np.array_equal(comp.direct_weights[0] > 0, n <= 2**k)
    for block in range(1, comp.max_block + 1):
        band = (n > 2 ** (k + block - 1)) & (n <= 2 ** (k + block))
        assert np.array_equal(comp.direct_weights[block] > 0, band)
        assert np.array_equal(comp.abel_weights[block - 1] > 0, band)
        expected = n[band] ** (comp.tau / 2 - 1.0)
        assert np.allclose(comp.abel_weights[block - 1][band], expected, rtol=1e-12)


def test_separation_bound_grid_depth_guard(hierarchy):
    with pytest.raises(ValueError):
        spectral.separation_bound(hierarchy, 0.5, spectral.DyadicInterval(2, 1), 0.4, 8)


def test_conditional_centering_of_localized_vector():
    # resample the top level only; the localized vector is centered given
    # the levels below
    grid = sampler.GridSpec(256)
    base = sampler.sample_hierarchy(3, grid, seed=99, replica=0)
    interval = spectral.DyadicInterval(2, 2)
    n_resample = 10**4
    picks = (1, 5, 17)
    values = np.empty((n_resample, len(picks)), dtype=complex)
    for r in range(n_resample):
        top = sampler.sample_level(3, grid, seed=99, replica=r + 1)
        rows = np.concatenate([base.samples[:3], top[None, :]])
        h = sampler.FieldHierarchy(
            grid=grid, depth=3, samples=rows, variances=base.variances.copy(),
            seed=99, replica=r + 1,
        )
        vec = spectral.localized_vector(h, 0.5, interval, 0.4, 32)
        values[r] = vec.values[list(picks)]
    for col in range(len(picks)):
        for part in (values[:, col].real, values[:, col].imag):
            se = part.std(ddof=1) / math.sqrt(n_resample)
            assert abs(part.mean()) <= 3 * se


def test_spectrum_csv_export(tmp_path, hierarchy):
    spec = spectral.martingale_vector(
        spectral.fourier_coefficients(measure.chaos_density(hierarchy, 0.5), 16), 0.5
    )
    path = tmp_path / "spectrum.csv"
    spectral.write_spectrum_csv(spec, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "n,re,im,abs2,weighted_abs"
    assert len(lines) == 17
    n, re, im, abs2, weighted = lines[1].split(",")
    assert int(n) == 1
    assert float(abs2) == pytest.approx(float(re) ** 2 + float(im) ** 2, rel=1e-12)
    assert float(weighted) == pytest.approx(math.sqrt(float(abs2)), rel=1e-12)


def test_separation_json_export(tmp_path, hierarchy):
    import json

    comp = spectral.separation_bound(hierarchy, 0.5, spectral.DyadicInterval(2, 1), 0.4, 3)
    path = tmp_path / "separation.json"
    spectral.write_separation_json(comp, path)
    data = json.loads(path.read_text())
    assert data["level_k"] == 3
    assert data["all_satisfied"] is True
    assert len(data["bound"]) == len(data["n"])
