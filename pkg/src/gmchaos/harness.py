"""Deterministic Monte Carlo orchestration, aggregation and persistence.

A replica is a pure function of (config, replica id); an ensemble is the
reduction of its replicas through a fixed pairwise summation tree, so the
result is byte-identical no matter how the replicas were scheduled.
Aggregates are mergeable: counts and reservoirs merge exactly, floating
accumulators merge associatively to rounding.

Quantile statistics use bounded mergeable reservoirs: every (replica, n)
sample carries a deterministic hash priority and each frequency block keeps
the lowest-priority samples, which makes reservoir contents independent of
merge order.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import estimators, measure, rng, spectral
from .sampler import GridSpec, sample_hierarchy

VERSION = "gmchaos 0.1.0"

RESERVOIR_SIZE = 256


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run depends on; validated on construction.

    Frequencies are capped at an eighth of the grid and the construction
    depth must exceed log2(n_max) by two, so all reported statistics sit in
    the frequency range the discretization resolves.
    """

    gamma: float
    depth: int
    grid_size: int
    n_max: int
    tau: float = 0.0
    replicas: int = 1
    seed: int = 0
    statistic: str = "median"
    norm_depths: tuple[int, ...] = ()
    mass_levels: tuple[int, ...] = ()
    out: str | None = None
    fmt: str = "json"

    def __post_init__(self) -> None:
        measure.validate_gamma(self.gamma)
        grid = GridSpec(self.grid_size)  # validates power of two
        if not 1 <= self.n_max <= self.grid_size // spectral.NYQUIST_FRACTION:
            raise ValueError(
                f"n_max must lie in 1..{self.grid_size // spectral.NYQUIST_FRACTION}"
            )
        if self.depth < math.log2(self.n_max) + 2:
            raise ValueError(
                f"depth {self.depth} too shallow for n_max {self.n_max}; "
                f"need depth >= log2(n_max) + 2"
            )
        if self.replicas < 1:
            raise ValueError("replicas must be at least 1")
        if not 0.0 <= self.tau < 1.0:
            raise ValueError(f"tau must lie in [0, 1), got {self.tau!r}")
        if self.statistic not in ("mean", "median"):
            raise ValueError(f"statistic must be mean or median, got {self.statistic!r}")
        object.__setattr__(self, "norm_depths", tuple(int(d) for d in self.norm_depths))
        object.__setattr__(self, "mass_levels", tuple(int(v) for v in self.mass_levels))
        if any(not 0 <= d <= self.depth for d in self.norm_depths):
            raise ValueError("norm depths must lie within the construction depth")
        if any(not 0 <= v <= grid.log2_size for v in self.mass_levels):
            raise ValueError("mass levels must be resolvable on the grid")
        if self.fmt not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got {self.fmt!r}")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.grid_size)

    def science_key(self) -> tuple:
        """Fields that must agree for two aggregates to be mergeable."""
        return (
            self.gamma,
            self.depth,
            self.grid_size,
            self.n_max,
            self.tau,
            self.replicas,
            self.seed,
            self.statistic,
            self.norm_depths,
            self.mass_levels,
        )

    def exponents(self) -> estimators.ExponentPlan | None:
        if not self.norm_depths or self.gamma == 0.0:
            return None
        return estimators.find_exponents(self.gamma, self.tau)

    def block_exponents(self) -> list[int]:
        """Exponents a of the frequency blocks [2^a, 2^(a+1)) meeting 1..n_max."""
        return list(range(int(math.log2(self.n_max)) + 1))


@dataclass(frozen=True)
class ReplicaRecord:
    """Raw per-replica statistics before aggregation."""

    replica: int
    coefficients: np.ndarray
    total_mass: float
    level_mass_sq: np.ndarray
    norm_powers: np.ndarray


@dataclass(frozen=True)
class Reservoir:
    """Lowest-priority samples of one frequency block, merge-invariant."""

    priority: np.ndarray
    value: np.ndarray
    replica: np.ndarray
    n: np.ndarray

    @staticmethod
    def empty() -> "Reservoir":
        return Reservoir(
            priority=np.empty(0, dtype=np.uint64),
            value=np.empty(0),
            replica=np.empty(0, dtype=np.int64),
            n=np.empty(0, dtype=np.int64),
        )

    def merged(self, other: "Reservoir") -> "Reservoir":
        priority = np.concatenate([self.priority, other.priority])
        value = np.concatenate([self.value, other.value])
        replica = np.concatenate([self.replica, other.replica])
        n = np.concatenate([self.n, other.n])
        order = np.lexsort((n, replica, priority))[:RESERVOIR_SIZE]
        return Reservoir(priority[order], value[order], replica[order], n[order])

    def equals(self, other: "Reservoir") -> bool:
        return (
            np.array_equal(self.priority, other.priority)
            and np.array_equal(self.value, other.value)
            and np.array_equal(self.replica, other.replica)
            and np.array_equal(self.n, other.n)
        )


@dataclass(frozen=True)
class EnsembleResult:
    """Mergeable aggregate of replica statistics for one configuration."""

    config: ExperimentConfig
    count: int
    coeff_sum: np.ndarray
    abs2_sum: np.ndarray
    abs2_sq_sum: np.ndarray
    log_abs2_sum: np.ndarray
    mass_sum: float
    mass_sq_sum: float
    level_sq_sum: np.ndarray
    norm_sum: np.ndarray
    reservoirs: dict[int, Reservoir] = field(repr=False)

    def equals(self, other: "EnsembleResult") -> bool:
        return (
            self.config == other.config
            and self.count == other.count
            and np.array_equal(self.coeff_sum, other.coeff_sum)
            and np.array_equal(self.abs2_sum, other.abs2_sum)
            and np.array_equal(self.abs2_sq_sum, other.abs2_sq_sum)
            and np.array_equal(self.log_abs2_sum, other.log_abs2_sum)
            and self.mass_sum == other.mass_sum
            and self.mass_sq_sum == other.mass_sq_sum
            and np.array_equal(self.level_sq_sum, other.level_sq_sum)
            and np.array_equal(self.norm_sum, other.norm_sum)
            and sorted(self.reservoirs) == sorted(other.reservoirs)
            and all(self.reservoirs[a].equals(other.reservoirs[a]) for a in self.reservoirs)
        )


def empty_result(config: ExperimentConfig) -> EnsembleResult:
    return EnsembleResult(
        config=config,
        count=0,
        coeff_sum=np.zeros(config.n_max, dtype=complex),
        abs2_sum=np.zeros(config.n_max),
        abs2_sq_sum=np.zeros(config.n_max),
        log_abs2_sum=np.zeros(config.n_max),
        mass_sum=0.0,
        mass_sq_sum=0.0,
        level_sq_sum=np.zeros(len(config.mass_levels)),
        norm_sum=np.zeros(len(config.norm_depths)),
        reservoirs={a: Reservoir.empty() for a in config.block_exponents()},
    )


def run_replica(config: ExperimentConfig, replica_id: int) -> ReplicaRecord:
    """One replica: hierarchy, density, spectrum and derived statistics.

    Deterministic in (config.seed, replica_id); every stochastic stream is
    keyed by that pair.
    """
    hierarchy = sample_hierarchy(config.depth, config.grid, config.seed, replica_id)
    density = measure.chaos_density(hierarchy, config.gamma)
    spectrum = spectral.fourier_coefficients(density, config.n_max)
    level_sq = np.array(
        [float(np.sum(measure.dyadic_masses(density, lv) ** 2)) for lv in config.mass_levels]
    )
    plan = config.exponents()
    if plan is None:
        norms = np.zeros(len(config.norm_depths))
    else:
        norms = np.empty(len(config.norm_depths))
        for i, depth in enumerate(config.norm_depths):
            part = measure.chaos_density(hierarchy, config.gamma, depth=depth)
            vec = spectral.martingale_vector(
                spectral.fourier_coefficients(part, config.n_max), config.tau
            )
            norms[i] = vec.lq(plan.q) ** plan.p
    return ReplicaRecord(
        replica=int(replica_id),
        coefficients=spectrum.coefficients,
        total_mass=float(density.values.mean()),
        level_mass_sq=level_sq,
        norm_powers=norms,
    )


def _singleton(config: ExperimentConfig, record: ReplicaRecord) -> EnsembleResult:
    abs2 = np.abs(record.coefficients) ** 2
    reservoirs = {}
    for a in config.block_exponents():
        lo = 2**a
        hi = min(2 ** (a + 1) - 1, config.n_max)
        n = np.arange(lo, hi + 1)
        priorities = rng.item_priorities(config.seed, a, record.replica, n)
        order = np.argsort(priorities, kind="stable")[:RESERVOIR_SIZE]
        reservoirs[a] = Reservoir(
            priority=priorities[order],
            value=abs2[n[order] - 1],
            replica=np.full(order.size, record.replica, dtype=np.int64),
            n=n[order].astype(np.int64),
        )
    return EnsembleResult(
        config=config,
        count=1,
        coeff_sum=record.coefficients.copy(),
        abs2_sum=abs2,
        abs2_sq_sum=abs2**2,
        log_abs2_sum=np.log(np.maximum(abs2, 1e-300)),
        mass_sum=record.total_mass,
        mass_sq_sum=record.total_mass**2,
        level_sq_sum=record.level_mass_sq.copy(),
        norm_sum=record.norm_powers.copy(),
        reservoirs=reservoirs,
    )


def merge_results(a: EnsembleResult, b: EnsembleResult) -> EnsembleResult:
    """Accumulator sums added, counts added, reservoirs merged by priority."""
    if a.config.science_key() != b.config.science_key():
        raise ValueError("cannot merge results with different configurations")
    return EnsembleResult(
        config=a.config,
        count=a.count + b.count,
        coeff_sum=a.coeff_sum + b.coeff_sum,
        abs2_sum=a.abs2_sum + b.abs2_sum,
        abs2_sq_sum=a.abs2_sq_sum + b.abs2_sq_sum,
        log_abs2_sum=a.log_abs2_sum + b.log_abs2_sum,
        mass_sum=a.mass_sum + b.mass_sum,
        mass_sq_sum=a.mass_sq_sum + b.mass_sq_sum,
        level_sq_sum=a.level_sq_sum + b.level_sq_sum,
        norm_sum=a.norm_sum + b.norm_sum,
        reservoirs={key: a.reservoirs[key].merged(b.reservoirs[key]) for key in a.reservoirs},
    )


def _tree_reduce(items: list[EnsembleResult], config: ExperimentConfig) -> EnsembleResult:
    # Fixed pairwise tree keyed by position: the reduction order never
    # depends on scheduling, so floating sums are bit-stable.
    if not items:
        return empty_result(config)
    while len(items) > 1:
        items = [
            merge_results(items[i], items[i + 1]) if i + 1 < len(items) else items[i]
            for i in range(0, len(items), 2)
        ]
    return items[0]


def run_ensemble(
    config: ExperimentConfig,
    replica_range: tuple[int, int] | None = None,
    workers: int | None = None,
) -> EnsembleResult:
    """Reduce run_replica over a replica id range (default 0..replicas).

    The reduction follows a fixed pairwise tree over the id order, so any
    degree of parallelism produces identical bytes.
    """
    lo, hi = replica_range if replica_range is not None else (0, config.replicas)
    ids = list(range(lo, hi))
    if workers and workers > 1 and len(ids) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_replica, [config] * len(ids), ids, chunksize=8))
    else:
        records = [run_replica(config, i) for i in ids]
    return _tree_reduce([_singleton(config, rec) for rec in records], config)


# ---------------------------------------------------------------------------
# Derived fits


def block_table(result: EnsembleResult) -> list[tuple[int, int, float]]:
    """Per-block decay statistic (block_lo, block_hi, stat of log |mu_hat|^2)."""
    if result.count == 0:
        raise ValueError("empty ensemble has no statistics")
    config = result.config
    rows = []
    for a in config.block_exponents():
        lo = 2**a
        hi = min(2 ** (a + 1) - 1, config.n_max)
        if config.statistic == "mean":
            stat = float(np.mean(result.log_abs2_sum[lo - 1 : hi] / result.count))
        else:
            values = result.reservoirs[a].value
            stat = float(np.log(max(np.median(values), 1e-300)))
        rows.append((lo, hi, stat))
    return rows


def decay_fit_from_result(
    result: EnsembleResult, n_lo: int | None = None, n_hi: int | None = None
) -> estimators.SlopeFit:
    """Decay-slope fit re-derived from the aggregate accumulators."""
    config = result.config
    n_lo = 8 if n_lo is None else n_lo
    n_hi = config.n_max if n_hi is None else n_hi
    exponents = estimators._block_exponents(n_lo, n_hi)
    if len(exponents) < 4:
        raise ValueError(f"need at least 4 complete dyadic blocks in [{n_lo}, {n_hi}]")
    table = {lo: stat for lo, hi, stat in block_table(result)}
    xs, ys, blocks = [], [], []
    for a in exponents:
        lo, hi = 2**a, 2 ** (a + 1)
        x = float(np.mean(np.log(np.arange(lo, hi))))
        y = table[lo]
        xs.append(x)
        ys.append(y)
        blocks.append((float(lo), float(hi), x, y))
    slope, intercept, stderr = estimators.line_fit(np.array(xs), np.array(ys))
    return estimators.SlopeFit(
        slope=slope,
        intercept=intercept,
        stderr=stderr,
        lo=float(2 ** exponents[0]),
        hi=float(2 ** (exponents[-1] + 1)),
        statistic=config.statistic,
        blocks=tuple(blocks),
    )


def l2_fit_from_result(result: EnsembleResult) -> estimators.SlopeFit:
    if not result.config.mass_levels:
        raise ValueError("configuration recorded no mass levels")
    sums = result.level_sq_sum / result.count
    return estimators.l2_spectrum_slope(sums[None, :], result.config.mass_levels)


def clt_profile_from_result(
    result: EnsembleResult, block_lo_exp: int, block_hi_exp: int
) -> list[tuple[int, int, float]]:
    """Rescaled-coefficient variance profile from the aggregates.

    Uses the population variance E|z|^2 - |E z|^2 per frequency.
    """
    exponent = estimators.clt_exponent(result.config.gamma)
    if result.count < 100:
        raise ValueError(f"rescaling profile needs at least 100 replicas, got {result.count}")
    mean = result.coeff_sum / result.count
    var = result.abs2_sum / result.count - np.abs(mean) ** 2
    out = []
    for a in range(block_lo_exp, block_hi_exp):
        lo, hi = 2**a, 2 ** (a + 1)
        if hi - 1 > result.config.n_max:
            raise ValueError(f"block [{lo}, {hi}) beyond n_max = {result.config.n_max}")
        n = np.arange(lo, hi)
        out.append((lo, hi, float(np.mean(n ** (2.0 * exponent) * var[lo - 1 : hi - 1]))))
    return out


# ---------------------------------------------------------------------------
# Persistence


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "gamma": config.gamma,
        "depth": config.depth,
        "grid_size": config.grid_size,
        "n_max": config.n_max,
        "tau": config.tau,
        "replicas": config.replicas,
        "seed": config.seed,
        "statistic": config.statistic,
        "norm_depths": list(config.norm_depths),
        "mass_levels": list(config.mass_levels),
        "out": config.out,
        "fmt": config.fmt,
    }


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    data["norm_depths"] = tuple(data.get("norm_depths", ()))
    data["mass_levels"] = tuple(data.get("mass_levels", ()))
    return ExperimentConfig(**data)


def export_result(result: EnsembleResult, fmt: str, path) -> None:
    """JSON is the archival format (loadable); CSV is the block-stat table."""
    if fmt == "json":
        payload = {
            "version": VERSION,
            "config": config_to_dict(result.config),
            "count": result.count,
            "coeff_sum_re": result.coeff_sum.real.tolist(),
            "coeff_sum_im": result.coeff_sum.imag.tolist(),
            "abs2_sum": result.abs2_sum.tolist(),
            "abs2_sq_sum": result.abs2_sq_sum.tolist(),
            "log_abs2_sum": result.log_abs2_sum.tolist(),
            "mass_sum": result.mass_sum,
            "mass_sq_sum": result.mass_sq_sum,
            "level_sq_sum": result.level_sq_sum.tolist(),
            "norm_sum": result.norm_sum.tolist(),
            "reservoirs": {
                str(a): {
                    "priority": [int(v) for v in res.priority],
                    "value": res.value.tolist(),
                    "replica": res.replica.tolist(),
                    "n": res.n.tolist(),
                }
                for a, res in sorted(result.reservoirs.items())
            },
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            fh.write("block_lo,block_hi,stat\n")
            for lo, hi, stat in block_table(result):
                fh.write(f"{lo},{hi},{stat!r}\n")
    else:
        raise ValueError(f"format must be csv or json, got {fmt!r}")


def load_result(path) -> EnsembleResult:
    with open(path) as fh:
        payload = json.load(fh)
    config = config_from_dict(payload["config"])
    reservoirs = {
        int(a): Reservoir(
            priority=np.array(res["priority"], dtype=np.uint64),
            value=np.array(res["value"], dtype=float),
            replica=np.array(res["replica"], dtype=np.int64),
            n=np.array(res["n"], dtype=np.int64),
        )
        for a, res in payload["reservoirs"].items()
    }
    return EnsembleResult(
        config=config,
        count=payload["count"],
        coeff_sum=np.array(payload["coeff_sum_re"]) + 1j * np.array(payload["coeff_sum_im"]),
        abs2_sum=np.array(payload["abs2_sum"]),
        abs2_sq_sum=np.array(payload["abs2_sq_sum"]),
        log_abs2_sum=np.array(payload["log_abs2_sum"]),
        mass_sum=payload["mass_sum"],
        mass_sq_sum=payload["mass_sq_sum"],
        level_sq_sum=np.array(payload["level_sq_sum"]),
        norm_sum=np.array(payload["norm_sum"]),
        reservoirs=reservoirs,
    )
