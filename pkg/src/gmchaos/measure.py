"""Multiplicative weights and the approximate chaos density on the grid.

The depth-m density is the product over levels j <= m of
exp(gamma * field_j - gamma^2/2 * var_j); each factor has unit mean, so the
density is a positive unit-mean martingale in the depth.  Measure queries
(interval masses, dyadic scans) use the left-endpoint rectangle rule, which
makes dyadic additivity and the spectral decomposition identities exact at
grid level.

Moment and regularity probes sample exact low-dimensional Gaussians from the
closed-form covariances instead of grid fields, so their statistics carry no
discretization bias.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import geometry, rng
from .sampler import FieldHierarchy, GridSpec

SQRT2 = math.sqrt(2.0)

# Probe stream sub-tags, keeping the two Monte Carlo probe families on
# disjoint key spaces.
_MOMENT_PROBE = 101
_HOLDER_PROBE = 102


def validate_gamma(gamma: float) -> float:
    """Intermittency parameter check: the sub-critical range is [0, sqrt 2)."""
    g = float(gamma)
    if not 0.0 <= g < SQRT2:
        raise ValueError(f"gamma must lie in [0, sqrt(2)), got {gamma!r}")
    return g


@dataclass(frozen=True)
class ChaosDensity:
    """Grid samples of the depth-m approximate chaos density for one gamma."""

    grid: GridSpec
    gamma: float
    depth: int
    values: np.ndarray
    seed: int
    replica: int

    def __post_init__(self) -> None:
        self.values.setflags(write=False)


def weight_field(hierarchy: FieldHierarchy, j: int, gamma: float) -> np.ndarray:
    """Unit-mean multiplicative weight of level j on the grid."""
    validate_gamma(gamma)
    row = hierarchy.level(j)
    return np.exp(gamma * row - 0.5 * gamma**2 * hierarchy.variances[j])


def chaos_density(hierarchy: FieldHierarchy, gamma: float, depth: int | None = None) -> ChaosDensity:
    """Product of the level weights up to `depth` (default: full hierarchy).

    The exponent is accumulated across levels and exponentiated once, so
    deep or large-gamma products cannot overflow factor by factor.
    """
    validate_gamma(gamma)
    if depth is None:
        depth = hierarchy.depth
    if not 0 <= depth <= hierarchy.depth:
        raise ValueError(f"depth {depth} outside 0..{hierarchy.depth}")
    rows = hierarchy.samples[: depth + 1]
    variances = hierarchy.variances[: depth + 1]
    exponent = gamma * rows.sum(axis=0) - 0.5 * gamma**2 * variances.sum()
    return ChaosDensity(
        grid=hierarchy.grid,
        gamma=float(gamma),
        depth=int(depth),
        values=np.exp(exponent),
        seed=hierarchy.seed,
        replica=hierarchy.replica,
    )


def _grid_index(x: float, grid: GridSpec) -> int:
    scaled = x * grid.size
    idx = round(scaled)
    if abs(scaled - idx) > 1e-9:
        raise ValueError(f"endpoint {x!r} is not aligned with the grid of size {grid.size}")
    return idx


def interval_mass(density: ChaosDensity, interval: tuple[float, float]) -> float:
    """Rectangle-rule mass of a grid-aligned interval [a, b) in [0, 1]."""
    a, b = interval
    if not 0.0 <= a <= b <= 1.0:
        raise ValueError(f"interval {interval!r} must satisfy 0 <= a <= b <= 1")
    ia = _grid_index(a, density.grid)
    ib = _grid_index(b, density.grid)
    return float(density.values[ia:ib].sum()) / density.grid.size


def dyadic_masses(density: ChaosDensity, level: int) -> np.ndarray:
    """Masses of the 2^level dyadic intervals, left to right."""
    g = density.grid.log2_size
    if not 0 <= level <= g:
        raise ValueError(f"dyadic level {level} outside 0..{g}")
    return density.values.reshape(2**level, -1).sum(axis=1) / density.grid.size


def frostman_scan(density: ChaosDensity, alpha: float, levels) -> np.ndarray:
    """Per-level sup over dyadic intervals of mass(I) / |I|^alpha."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha!r}")
    out = np.empty(len(levels))
    for i, level in enumerate(levels):
        masses = dyadic_masses(density, level)
        out[i] = masses.max() * 2.0 ** (level * alpha)
    return out


def weight_moment(gamma: float, j: int, p: float) -> float:
    """Closed-form p-th moment of a level weight: exp(p(p-1) gamma^2/2 * var)."""
    validate_gamma(gamma)
    if p <= 0:
        raise ValueError("moment order must be positive")
    return math.exp(0.5 * p * (p - 1) * gamma**2 * geometry.level_variance(j))


def weight_moment_mc(
    gamma: float, j: int, p: float, n_samples: int, seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo (mean, standard error) of the p-th weight moment.

    Draws the level field at a single point from its exact normal law.
    """
    validate_gamma(gamma)
    var = geometry.level_variance(j)
    gen = rng.probe_stream(seed, _MOMENT_PROBE, j)
    phi = gen.standard_normal(int(n_samples)) * math.sqrt(var)
    values = np.exp(gamma * phi - 0.5 * gamma**2 * var) ** p
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def _pair_cholesky(j: int, h: float) -> np.ndarray:
    var = geometry.level_variance(j)
    cov = geometry.level_covariance(j, h)
    return np.linalg.cholesky(np.array([[var, cov], [cov, var]]))


def _holder_ratio(gamma: float, j: int, p: float, h: float, pair: np.ndarray) -> np.ndarray:
    var = geometry.level_variance(j)
    weights = np.exp(gamma * pair - 0.5 * gamma**2 * var)
    return np.abs(weights[0] - weights[1]) ** p / (2.0**j * h) ** (p / 2.0)


def holder_moment_probe(
    gamma: float, j: int, p: float, h: float, n_samples: int, seed: int = 0
) -> float:
    """Monte Carlo regularity ratio E|X(h) - X(0)|^p / (2^j h)^(p/2).

    Samples the exact bivariate normal of the level field at lag h; no grid
    is involved.  Requires 0 < h <= 2^-j and at least 10^4 samples.
    """
    validate_gamma(gamma)
    if not 0.0 < h <= 2.0 ** (-j):
        raise ValueError(f"lag must lie in (0, 2^-{j}]")
    if n_samples < 10**4:
        raise ValueError("regularity probes need at least 10^4 samples")
    chol = _pair_cholesky(j, h)
    gen = rng.probe_stream(seed, _HOLDER_PROBE, j, int(round(-math.log2(h))))
    pair = chol @ gen.standard_normal((2, int(n_samples)))
    return float(_holder_ratio(gamma, j, p, h, pair).mean())


def holder_moment_quadrature(gamma: float, j: int, p: float, h: float, order: int = 80) -> float:
    """Gauss-Hermite evaluation of the regularity ratio (quadrature oracle)."""
    validate_gamma(gamma)
    if not 0.0 < h <= 2.0 ** (-j):
        raise ValueError(f"lag must lie in (0, 2^-{j}]")
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    std_pair = SQRT2 * np.stack(np.meshgrid(nodes, nodes, indexing="ij")).reshape(2, -1)
    w2 = np.outer(weights, weights).ravel() / math.pi
    pair = _pair_cholesky(j, h) @ std_pair
    return float(np.sum(w2 * _holder_ratio(gamma, j, p, h, pair)))


def write_density_csv(density: ChaosDensity, path) -> None:
    """CSV dump with columns (i, t, value), one row per grid point."""
    times = density.grid.times()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "t", "value"])
        for i, (t, v) in enumerate(zip(times, density.values)):
            writer.writerow([i, repr(float(t)), repr(float(v))])
