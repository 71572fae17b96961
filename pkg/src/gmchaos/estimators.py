"""Closed-form dimension exponents and statistical slope estimators.

The decay exponent of the chaos measure's Fourier coefficients has a
two-branch closed form in gamma; the same value is the measure's
correlation dimension, computed from the power-law moment spectrum.  The
statistical side estimates these exponents from simulated ensembles:
dyadic-block regression of the coefficient decay, L2 sums of dyadic
interval masses, the variance profile of rescaled coefficients, and the
uniform-boundedness probe for the weighted coefficient martingale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import spectral

SQRT2 = math.sqrt(2.0)

# Moment order slightly inside the admissible range; the searched pair
# (p, q) sits this far from the optimizing endpoint.
SEARCH_EPS = 1e-3

_LOG_FLOOR = 1e-300


class NoFeasibleExponentsError(ValueError):
    """No (p, q) pair certifies the requested decay exponent."""


def fourier_dimension(gamma: float) -> float:
    """Decay exponent of the chaos measure: 1 - gamma^2 below sqrt(2)/2,
    (sqrt(2) - gamma)^2 up to the critical point."""
    g = float(gamma)
    if not 0.0 <= g < SQRT2:
        raise ValueError(f"gamma must lie in [0, sqrt(2)), got {gamma!r}")
    if g < SQRT2 / 2.0:
        return 1.0 - g**2
    return (SQRT2 - g) ** 2


def power_law_spectrum(gamma: float, q: float) -> float:
    """Moment-scaling exponent (1 + gamma^2/2) q - gamma^2 q^2 / 2."""
    g = float(gamma)
    if not 0.0 <= g < SQRT2:
        raise ValueError(f"gamma must lie in [0, sqrt(2)), got {gamma!r}")
    return (1.0 + g**2 / 2.0) * q - g**2 * q**2 / 2.0


def correlation_dimension(gamma: float) -> float:
    """L2-scaling exponent of interval masses, from the moment spectrum."""
    g = float(gamma)
    if not 0.0 <= g < SQRT2:
        raise ValueError(f"gamma must lie in [0, sqrt(2)), got {gamma!r}")
    if g == 0.0:
        return 1.0
    if 2.0 <= SQRT2 / g:
        return power_law_spectrum(g, 2.0) - 1.0
    # Derivative branch: 2 * d/dq spectrum at q = sqrt(2)/gamma.
    return 2.0 * (1.0 + g**2 / 2.0 - g**2 * (SQRT2 / g))


def decay_exponent_bound(gamma: float, p: float) -> float:
    """Decay exponent certified by moment order p: 2 + gamma^2 - gamma^2 p - 2/p."""
    g = float(gamma)
    if not 0.0 <= g < SQRT2:
        raise ValueError(f"gamma must lie in [0, sqrt(2)), got {gamma!r}")
    if not 1.0 < p <= 2.0:
        raise ValueError(f"moment order must lie in (1, 2], got {p!r}")
    return 2.0 + g**2 - g**2 * p - 2.0 / p


def exponent_margin(gamma: float, tau: float, p: float, q: float) -> float:
    """Summability margin (p-1)(1 - gamma^2 p/2) - tau p/2 - p/q.

    Positive margin makes the localized contributions summable over all
    generations, certifying coefficient decay at exponent tau.
    """
    g = float(gamma)
    if not 0.0 <= g < SQRT2:
        raise ValueError(f"gamma must lie in [0, sqrt(2)), got {gamma!r}")
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"tau must lie in [0, 1), got {tau!r}")
    if not 1.0 < p < 2.0:
        raise ValueError(f"moment order must lie in (1, 2), got {p!r}")
    if q <= 4.0 / (1.0 - tau):
        raise ValueError(f"q must exceed 4/(1 - tau) = {4.0 / (1.0 - tau):.6g}, got {q!r}")
    return (p - 1.0) * (1.0 - g**2 * p / 2.0) - tau * p / 2.0 - p / q


@dataclass(frozen=True)
class ExponentPlan:
    """A certified (p, q) pair and its summability margin for one (gamma, tau)."""

    p: float
    q: float
    margin: float


def find_exponents(gamma: float, tau: float) -> ExponentPlan:
    """Deterministic (p, q) with positive margin, or an error when tau is
    at or above the attainable decay exponent.

    p sits SEARCH_EPS inside (1, 2) next to the maximizer of the certified
    decay rate; q is the smallest power of two exceeding 4/(1 - tau) that
    leaves the margin positive.
    """
    g = float(gamma)
    if not 0.0 < g < SQRT2:
        raise ValueError(f"gamma must lie in (0, sqrt(2)), got {gamma!r}")
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"tau must lie in [0, 1), got {tau!r}")
    limit = fourier_dimension(g)
    if tau >= limit:
        raise NoFeasibleExponentsError(
            f"tau = {tau:.6g} is not below the attainable exponent {limit:.6g}"
        )
    p_star = 2.0 if g < SQRT2 / 2.0 else SQRT2 / g
    p = max(1.0 + SEARCH_EPS, p_star - SEARCH_EPS)
    ceiling = (p / 2.0) * (decay_exponent_bound(g, p) - tau)
    if ceiling <= 0.0:
        raise NoFeasibleExponentsError(
            f"tau = {tau:.6g} too close to the exponent {limit:.6g} for the "
            f"fixed offset {SEARCH_EPS}"
        )
    exponent = 2
    while True:
        q = float(2**exponent)
        if q > 4.0 / (1.0 - tau):
            margin = exponent_margin(g, tau, p, q)
            if margin > 0.0:
                return ExponentPlan(p=p, q=q, margin=margin)
        exponent += 1


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line through dyadic-block statistics."""

    slope: float
    intercept: float
    stderr: float
    lo: float
    hi: float
    statistic: str
    blocks: tuple[tuple[float, float, float, float], ...]  # (lo, hi, x, y)


def line_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Ordinary least squares with the usual slope standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    if x.size > 2:
        resid = y - (slope * x + intercept)
        stderr = math.sqrt(resid @ resid / (x.size - 2) / np.sum((x - x.mean()) ** 2))
    else:
        stderr = float("nan")
    return float(slope), float(intercept), float(stderr)


def _block_exponents(n_lo: int, n_hi: int) -> list[int]:
    # Complete dyadic blocks [2^a, 2^(a+1)) inside [n_lo, n_hi].
    out = []
    a = max(0, math.ceil(math.log2(max(n_lo, 1))))
    while 2 ** (a + 1) <= n_hi + 1:
        out.append(a)
        a += 1
    return out


def _pool_statistic(values: np.ndarray, statistic: str, q: float | None) -> float:
    if statistic == "mean":
        return float(values.mean())
    if statistic == "median":
        return float(np.median(values))
    if statistic == "quantile":
        return float(np.quantile(values, q))
    raise ValueError(f"statistic must be mean, median or quantile, got {statistic!r}")


def decay_slope(
    abs2,
    n_lo: int,
    n_hi: int,
    statistic: str = "median",
    q: float | None = None,
) -> SlopeFit:
    """Dyadic-block regression of log |mu_hat(n)|^2 against log n.

    `abs2` holds |mu_hat(n)|^2 with columns n = 1.. (one row per replica).
    For each complete block [2^a, 2^(a+1)) inside [n_lo, n_hi], the chosen
    statistic of the pooled log values is regressed on the block's mean
    log-frequency; the slope estimates minus the decay exponent.
    """
    data = np.atleast_2d(np.asarray(abs2, dtype=float))
    replicas, n_max = data.shape
    if statistic == "quantile" and q is None:
        raise ValueError("quantile statistic needs q")
    if statistic in ("median", "quantile") and replicas < 30:
        raise ValueError(f"{statistic} statistic needs at least 30 replicas, got {replicas}")
    if n_hi > n_max:
        raise ValueError(f"n_hi = {n_hi} beyond the available {n_max} frequencies")
    exponents = _block_exponents(n_lo, n_hi)
    if len(exponents) < 4:
        raise ValueError(f"need at least 4 complete dyadic blocks in [{n_lo}, {n_hi}]")
    xs, ys, blocks = [], [], []
    for a in exponents:
        lo, hi = 2**a, 2 ** (a + 1)
        pooled = np.log(np.maximum(data[:, lo - 1 : hi - 1], _LOG_FLOOR))
        x = float(np.mean(np.log(np.arange(lo, hi))))
        y = _pool_statistic(pooled, statistic, q)
        xs.append(x)
        ys.append(y)
        blocks.append((float(lo), float(hi), x, y))
    slope, intercept, stderr = line_fit(np.array(xs), np.array(ys))
    label = f"quantile({q})" if statistic == "quantile" else statistic
    return SlopeFit(
        slope=slope,
        intercept=intercept,
        stderr=stderr,
        lo=float(2 ** exponents[0]),
        hi=float(2 ** (exponents[-1] + 1)),
        statistic=label,
        blocks=tuple(blocks),
    )


def l2_spectrum_slope(data, levels) -> SlopeFit:
    """Scaling of the dyadic L2 sums S(level) = sum of squared interval masses.

    `data` is either a sequence of chaos densities or an array of
    precomputed S values with one row per replica and one column per level.
    The fit of log mean S against log interval length estimates the
    correlation dimension.
    """
    from . import measure  # local import to keep module load light

    levels = list(levels)
    items = data if isinstance(data, np.ndarray) else list(data)
    if not isinstance(items, np.ndarray) and items and hasattr(items[0], "values"):
        sums = np.array(
            [[float(np.sum(measure.dyadic_masses(d, lv) ** 2)) for lv in levels] for d in items]
        )
    else:
        sums = np.atleast_2d(np.asarray(items, dtype=float))
    if sums.shape[1] != len(levels):
        raise ValueError("one column of S values per level is required")
    mean_s = sums.mean(axis=0)
    x = np.array([math.log(2.0**-lv) for lv in levels])
    y = np.log(np.maximum(mean_s, _LOG_FLOOR))
    slope, intercept, stderr = line_fit(x, y)
    blocks = tuple((float(lv), float(lv), float(xx), float(yy)) for lv, xx, yy in zip(levels, x, y))
    return SlopeFit(
        slope=slope,
        intercept=intercept,
        stderr=stderr,
        lo=float(levels[0]),
        hi=float(levels[-1]),
        statistic="mean",
        blocks=blocks,
    )


def clt_exponent(gamma: float) -> float:
    """Coefficient rescaling exponent (1 - gamma^2) / 2 of the small-gamma
    fluctuation regime."""
    g = float(gamma)
    if not 0.0 <= g < SQRT2 / 2.0:
        raise ValueError(f"rescaling regime needs gamma in [0, sqrt(2)/2), got {gamma!r}")
    return (1.0 - g**2) / 2.0


def clt_rescale_profile(
    coefficients, gamma: float, block_lo_exp: int, block_hi_exp: int
) -> list[tuple[int, int, float]]:
    """Per-block ensemble variance of the rescaled coefficients.

    Returns (block_lo, block_hi, variance) for each complete dyadic block
    between the two exponents; the variance of n^((1-gamma^2)/2) mu_hat(n)
    is averaged over the block.  Needs at least 100 replicas.
    """
    exponent = clt_exponent(gamma)
    data = np.atleast_2d(np.asarray(coefficients))
    replicas, n_max = data.shape
    if replicas < 100:
        raise ValueError(f"rescaling profile needs at least 100 replicas, got {replicas}")
    if 2**block_hi_exp - 1 > n_max:
        raise ValueError(f"blocks end at {2 ** block_hi_exp - 1}, beyond the {n_max} frequencies")
    out = []
    for a in range(block_lo_exp, block_hi_exp):
        lo, hi = 2**a, 2 ** (a + 1)
        z = data[:, lo - 1 : hi - 1]
        centred = z - z.mean(axis=0, keepdims=True)
        var_n = np.mean(np.abs(centred) ** 2, axis=0)
        n = np.arange(lo, hi)
        out.append((lo, hi, float(np.mean(n ** (2.0 * exponent) * var_n))))
    return out


def uniform_bound_probe(
    gamma: float,
    tau: float,
    p: float,
    q: float,
    spectra_by_depth: dict[int, np.ndarray],
) -> tuple[list[int], np.ndarray]:
    """Empirical mean of the p-th power of the weighted-coefficient l^q norm,
    per construction depth.

    `spectra_by_depth` maps a depth to the (replicas, n_max) coefficient
    array of the depth's density.  Rejects (p, q) pairs whose summability
    margin is not positive.
    """
    margin = exponent_margin(gamma, tau, p, q)
    if margin <= 0.0:
        raise NoFeasibleExponentsError(
            f"(p={p}, q={q}) infeasible for gamma={gamma}, tau={tau}: margin = {margin:.6g}"
        )
    depths = sorted(spectra_by_depth)
    means = np.empty(len(depths))
    for i, depth in enumerate(depths):
        coeffs = np.atleast_2d(np.asarray(spectra_by_depth[depth]))
        n = np.arange(1, coeffs.shape[1] + 1)
        weighted = n ** (tau / 2.0) * coeffs
        norms = np.sum(np.abs(weighted) ** q, axis=1) ** (1.0 / q)
        means[i] = np.mean(norms**p)
    return depths, means


def write_slope_csv(fit: SlopeFit, path) -> None:
    """Block table of a slope fit: (block_lo, block_hi, stat) with header."""
    with open(path, "w", newline="") as fh:
        fh.write("block_lo,block_hi,stat\n")
        for lo, hi, _x, y in fit.blocks:
            fh.write(f"{lo:g},{hi:g},{y!r}\n")


def write_profile_csv(rows, path) -> None:
    """Variance-profile table: (block_lo, block_hi, variance) with header."""
    with open(path, "w", newline="") as fh:
        fh.write("block_lo,block_hi,variance\n")
        for lo, hi, value in rows:
            fh.write(f"{lo},{hi},{float(value)!r}\n")


def slope_fit_to_dict(fit: SlopeFit) -> dict:
    return {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "stderr": fit.stderr,
        "lo": fit.lo,
        "hi": fit.hi,
        "statistic": fit.statistic,
        "blocks": [list(b) for b in fit.blocks],
    }
