"""Exact sampling of the independent stationary level fields on a grid.

Each level field is stationary with a compactly supported closed-form
covariance (see :mod:`gmchaos.geometry`), so it can be sampled exactly on a
uniform grid of [0, 1) by circulant embedding: periodize the covariance
with period 2 (twice the unit interval, so supports never wrap), take the
DFT to get the embedding eigenvalues, colour complex white noise and keep
the real part on the first half of the circle.  The periodized sequence is
positive semidefinite in exact arithmetic; tiny negative eigenvalues from
round-off are clamped, anything larger is treated as a formula bug.

A dense eigenfactorization sampler over small grids is included as a
cross-validation utility; it is not the production path.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import geometry, rng

# Relative clamp for embedding eigenvalues: absorbs DFT round-off of an
# exactly-PSD sequence, small enough to flag real negativity.
EPS_CLAMP = 1e-8

_DENSE_LIMIT = 512
_BINARY_HEADER = struct.Struct("<qqqq")  # grid size, depth, seed, replica


class NotEmbeddableError(ValueError):
    """Covariance periodization produced genuinely negative eigenvalues."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid t_i = i / size on [0, 1) with size a power of two."""

    size: int

    def __post_init__(self) -> None:
        g = self.size
        if not isinstance(g, (int, np.integer)) or g < 2 or g & (g - 1):
            raise ValueError(f"grid size must be a power of two >= 2, got {g!r}")
        object.__setattr__(self, "size", int(g))

    @property
    def log2_size(self) -> int:
        return self.size.bit_length() - 1

    def times(self) -> np.ndarray:
        return np.arange(self.size) / self.size


@dataclass(frozen=True)
class EmbeddingSpectrum:
    """DFT eigenvalues of the period-2 covariance periodization."""

    level: int
    period_points: int
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class FieldHierarchy:
    """Levels 0..depth of the field sampled on one grid, one replica.

    Row j holds the level-j field at the grid points; rows are independent
    by construction and the whole object is regenerated bit-for-bit from
    (seed, replica).
    """

    grid: GridSpec
    depth: int
    samples: np.ndarray
    variances: np.ndarray
    seed: int
    replica: int

    def __post_init__(self) -> None:
        self.samples.setflags(write=False)
        self.variances.setflags(write=False)

    def level(self, j: int) -> np.ndarray:
        if not 0 <= j <= self.depth:
            raise ValueError(f"level {j} outside 0..{self.depth}")
        return self.samples[j]


def covariance_sequence(j: int, grid: GridSpec) -> np.ndarray:
    """Period-2 covariance periodization sampled at the 2*size circle lags.

    Entry r is the closed-form covariance at circular lag min(r, 2G-r)/G;
    supports never exceed 1, so the periodization is overlap-free.
    """
    two_g = 2 * grid.size
    r = np.arange(two_g)
    lags = np.minimum(r, two_g - r) / grid.size
    return geometry.level_covariance(j, lags)


def embedding_spectrum(seq: np.ndarray, level: int = -1) -> EmbeddingSpectrum:
    """Eigenvalues (real DFT) of an even-length symmetric covariance sequence."""
    seq = np.asarray(seq, dtype=float)
    n = seq.size
    if n % 2:
        raise ValueError("covariance sequence must have even length")
    if not np.array_equal(seq[1:], seq[1:][::-1]):
        raise ValueError("covariance sequence must be symmetric")
    eig = np.fft.fft(seq).real
    top = float(eig.max(initial=0.0))
    floor = -EPS_CLAMP * top
    if np.any(eig < floor):
        worst = float(eig.min())
        raise NotEmbeddableError(
            f"embedding eigenvalue {worst:.3e} below clamp {floor:.3e}; "
            "the covariance sequence is not positive semidefinite"
        )
    return EmbeddingSpectrum(level=level, period_points=n, eigenvalues=np.maximum(eig, 0.0))


@lru_cache(maxsize=None)
def _embedding_for(j: int, grid: GridSpec) -> EmbeddingSpectrum:
    return embedding_spectrum(covariance_sequence(j, grid), level=j)


def sample_level(j: int, grid: GridSpec, seed: int, replica: int = 0) -> np.ndarray:
    """One exact draw of the level-j field at the grid points."""
    spec = _embedding_for(j, grid)
    m = spec.period_points
    gen = rng.field_stream(seed, replica, j)
    noise = gen.standard_normal((2, m))
    z = noise[0] + 1j * noise[1]
    coloured = np.fft.fft(z * np.sqrt(spec.eigenvalues / m))
    return np.ascontiguousarray(coloured.real[: grid.size])


def sample_hierarchy(m: int, grid: GridSpec, seed: int, replica: int = 0) -> FieldHierarchy:
    """Draw the independent level fields 0..m for one replica."""
    if not isinstance(m, (int, np.integer)) or m < 0:
        raise ValueError(f"depth must be a non-negative integer, got {m!r}")
    rows = np.stack([sample_level(j, grid, seed, replica) for j in range(m + 1)])
    variances = np.array([geometry.level_variance(j) for j in range(m + 1)])
    return FieldHierarchy(
        grid=grid, depth=int(m), samples=rows, variances=variances, seed=int(seed), replica=int(replica)
    )


def sample_level_dense(j: int, grid: GridSpec, seed: int, replica: int = 0) -> np.ndarray:
    """Dense-factorization draw of the level-j field (test utility).

    Builds the full grid covariance matrix from the closed form and
    factors it by symmetric eigendecomposition.  Same law as
    :func:`sample_level`, different path and different stream usage;
    limited to small grids.
    """
    if grid.size > _DENSE_LIMIT:
        raise ValueError(f"dense sampler limited to grids of size <= {_DENSE_LIMIT}")
    t = grid.times()
    cov = geometry.level_covariance(j, np.abs(t[:, None] - t[None, :]))
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, 0.0)
    factor = vecs * np.sqrt(vals)
    gen = rng.field_stream(seed, replica, j)
    return factor @ gen.standard_normal(grid.size)


def write_hierarchy(hierarchy: FieldHierarchy, path) -> None:
    """Binary dump: little-endian (size, depth, seed, replica) header, then
    the sample rows as row-major float64."""
    with open(path, "wb") as fh:
        fh.write(
            _BINARY_HEADER.pack(hierarchy.grid.size, hierarchy.depth, hierarchy.seed, hierarchy.replica)
        )
        fh.write(hierarchy.samples.astype("<f8").tobytes())


def read_hierarchy(path) -> FieldHierarchy:
    """Read back a binary dump written by :func:`write_hierarchy`."""
    with open(path, "rb") as fh:
        size, depth, seed, replica = _BINARY_HEADER.unpack(fh.read(_BINARY_HEADER.size))
        data = np.frombuffer(fh.read(), dtype="<f8").astype(float)
    grid = GridSpec(size)
    rows = data.reshape(depth + 1, size)
    variances = np.array([geometry.level_variance(j) for j in range(depth + 1)])
    return FieldHierarchy(
        grid=grid, depth=depth, samples=rows, variances=variances, seed=seed, replica=replica
    )
