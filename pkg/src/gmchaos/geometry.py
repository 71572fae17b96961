"""Closed-form hyperbolic-area calculus for the cone regions of the
white-noise decomposition of the log-correlated field on [0, 1].

The level-j field integrates a planar white noise, controlled by the
hyperbolic measure dx dy / y^2, over a horizontal strip of the cone
{(x, y) : y > max(2|x - t|, 2^-j)}; level 0 takes everything above
height 1.  Every second-order quantity of the level fields is the
hyperbolic area of an intersection of two such strips, which reduces to
a one-dimensional slab integral with closed-form value.  A numeric
quadrature of the same slab sections is provided as an independent
cross-check of the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)

# The level-0 strip extends to y = infinity; the quadrature oracle stops at
# this height.  The neglected tail has hyperbolic area width / Y_CUTOFF,
# reported in the oracle output.
Y_CUTOFF = 1.0e4


def _check_level(j: int) -> int:
    if not isinstance(j, (int, np.integer)) or j < 0:
        raise ValueError(f"level index must be a non-negative integer, got {j!r}")
    return int(j)


def _as_lags(h):
    arr = np.asarray(h, dtype=float)
    if np.any(arr < 0):
        raise ValueError("lags must be non-negative; take |t - s| before calling")
    return arr


def level_variance(j: int) -> float:
    """Pointwise variance of the level-j field: 1 for level 0, log 2 above."""
    _check_level(j)
    return 1.0 if j == 0 else LN2


def level_covariance(j: int, h):
    """Covariance of the level-j field at lag h >= 0.

    Equals the hyperbolic area of the intersection of two level-j strips
    whose apexes sit h apart.  Accepts a scalar or an array of lags.
    """
    j = _check_level(j)
    lags = _as_lags(h)
    if j == 0:
        out = np.maximum(0.0, 1.0 - lags)
    else:
        half = 2.0 ** (-(j - 1))  # strip top; support ends here
        full = 2.0 ** (-j)  # strip bottom
        out = np.zeros_like(lags)
        low = lags <= full
        mid = (lags > full) & (lags < half)
        out[low] = LN2 - lags[low] * 2.0 ** (j - 1)
        safe = np.where(mid, lags, 1.0)
        out[mid] = np.log(half / safe[mid]) + safe[mid] * 2.0 ** (j - 1) - 1.0
    return float(out) if np.isscalar(h) or np.ndim(h) == 0 else out


def cumulative_covariance(m: int, h):
    """Covariance of the depth-m cumulative field (levels 0..m summed).

    m*log(2) + 1 - 2^m h below lag 2^-m, -log(h) out to lag 1, then 0.
    """
    m = _check_level(m)
    lags = _as_lags(h)
    out = np.zeros_like(lags)
    near = lags < 2.0 ** (-m)
    far = (lags >= 2.0 ** (-m)) & (lags <= 1.0)
    out[near] = m * LN2 + 1.0 - lags[near] * 2.0**m
    safe = np.where(far, lags, 1.0)
    out[far] = -np.log(safe[far])
    return float(out) if np.isscalar(h) or np.ndim(h) == 0 else out


def region_difference_measure(j: int, t):
    """Hyperbolic area of a level-j strip minus its translate by t.

    Valid for 0 <= t <= 2^-j; equals t at level 0 and 2^(j-1) t above.
    """
    j = _check_level(j)
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(arr > 2.0 ** (-j)):
        raise ValueError(f"offset must lie in [0, 2^-{j}]")
    out = arr if j == 0 else arr * 2.0 ** (j - 1)
    return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out


@dataclass(frozen=True)
class OverlapQuadrature:
    """Numeric strip-overlap area plus the quadrature metadata."""

    value: float
    resolution: int
    y_cutoff: float
    tail_bound: float

    def __float__(self) -> float:
        return self.value


def _section(center: float, y: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
    # Horizontal section of the level-j strip at heights y: an interval
    # centered at the apex, of width y inside the cone (width 1 at level 0).
    half = np.full_like(y, 0.5) if j == 0 else y / 2.0
    return center - half, center + half


def overlap_quadrature(j: int, h: float, resolution: int = 2000) -> OverlapQuadrature:
    """Midpoint-rule area of the intersection of level-j strips at lag h.

    Slabs are geometrically spaced in height; each slab contributes
    (section overlap width) / y^2 * dy, the overlap width coming from
    direct interval intersection of the two cone sections.  Converges to
    level_covariance as resolution grows; level 0 is truncated at
    Y_CUTOFF with the neglected tail reported in the result.
    """
    j = _check_level(j)
    if resolution < 100:
        raise ValueError("resolution must be at least 100")
    if h < 0:
        raise ValueError("lags must be non-negative; take |t - s| before calling")
    if j == 0:
        y_lo, y_hi = 1.0, Y_CUTOFF
    else:
        y_lo, y_hi = 2.0 ** (-j), 2.0 ** (-(j - 1))
    edges = np.geomspace(y_lo, y_hi, resolution + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    lo1, hi1 = _section(0.0, mids, j)
    lo2, hi2 = _section(h, mids, j)
    overlap = np.maximum(0.0, np.minimum(hi1, hi2) - np.maximum(lo1, lo2))
    value = float(np.sum(overlap / mids**2 * widths))
    if j == 0:
        top_overlap = max(0.0, 1.0 - h)
        tail = top_overlap / Y_CUTOFF
    else:
        tail = 0.0
    return OverlapQuadrature(value=value, resolution=resolution, y_cutoff=y_hi, tail_bound=tail)
