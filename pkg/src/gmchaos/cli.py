"""Command-line front end.

Subcommands: verify (exact/closed-form suites), simulate (one replica),
spectrum (ensemble statistics), dims (slope estimates as JSON), clt
(rescaling profile) and report (re-derive fits from an archived ensemble).
A flat key=value config file can provide any flag's value; explicit flags
win.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import estimators, geometry, harness, measure, spectral
from .sampler import GridSpec, covariance_sequence, embedding_spectrum, sample_hierarchy


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {raw!r} is not key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _resolve(args: argparse.Namespace, spec: dict[str, tuple]) -> dict:
    """Merge CLI values, config-file values and defaults; flags win."""
    file_values = _read_config_file(args.config) if getattr(args, "config", None) else {}
    out = {}
    for key, (cast, default) in spec.items():
        cli = getattr(args, key, None)
        if cli is not None:
            out[key] = cli
        elif key in file_values:
            out[key] = cast(file_values[key])
        elif default is not _REQUIRED:
            out[key] = default
        else:
            raise SystemExit(f"missing required option --{key.replace('_', '-')}")
    return out


_REQUIRED = object()


# ---------------------------------------------------------------------------
# verify


def _check_geometry_oracle() -> str:
    lags = np.linspace(0.0, 1.1, 12)
    worst = 0.0
    for j in range(5):
        for h in lags:
            closed = geometry.level_covariance(j, float(h))
            quad = float(geometry.overlap_quadrature(j, float(h), 2000))
            worst = max(worst, abs(closed - quad))
    if worst > 1e-3:
        raise AssertionError(f"closed form vs quadrature deviation {worst:.2e} > 1e-3")
    return f"max |closed - quadrature| = {worst:.2e}"


def _check_telescoping() -> str:
    lags = np.linspace(0.0, 1.2, 301)
    worst = 0.0
    for m in range(11):
        total = sum(geometry.level_covariance(j, lags) for j in range(m + 1))
        worst = max(worst, float(np.max(np.abs(total - geometry.cumulative_covariance(m, lags)))))
    if worst > 1e-12:
        raise AssertionError(f"level sums deviate from cumulative covariance by {worst:.2e}")
    return f"max telescoping defect = {worst:.2e}"


def _check_branch_continuity() -> str:
    worst = 0.0
    for j in range(1, 11):
        for h in (2.0**-j, 2.0 ** (-(j - 1))):
            below = geometry.level_covariance(j, h * (1 - 1e-13))
            above = geometry.level_covariance(j, h * (1 + 1e-13))
            worst = max(worst, abs(below - above))
    if worst > 1e-12:
        raise AssertionError(f"branch mismatch {worst:.2e}")
    return f"max branch jump = {worst:.2e}"


def _check_embedding() -> str:
    worst = 0.0
    for j in range(5):
        grid = GridSpec(64)
        seq = covariance_sequence(j, grid)
        eig = embedding_spectrum(seq, level=j).eigenvalues
        implied = np.fft.ifft(eig).real
        worst = max(worst, float(np.max(np.abs(implied - seq))))
    if worst > 1e-10:
        raise AssertionError(f"embedding covariance defect {worst:.2e}")
    return f"max implied-covariance defect = {worst:.2e}"


def _check_product_identity(seed: int) -> str:
    gen = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        size = int(gen.integers(1, 9))
        a = gen.standard_normal(size) + 1j * gen.standard_normal(size)
        b = gen.standard_normal(size) + 1j * gen.standard_normal(size)
        direct = np.prod(a) - np.prod(b)
        worst = max(worst, abs(spectral.product_difference_expansion(a, b) - direct))
    if worst > 1e-12:
        raise AssertionError(f"product expansion defect {worst:.2e}")
    return f"max expansion defect = {worst:.2e}"


def _check_abel(seed: int) -> str:
    gen = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        level = int(gen.integers(0, 7))
        k = int(gen.integers(0, 4))
        family = spectral.dyadic_family(k)
        interval = family[int(gen.integers(0, len(family)))]
        values = gen.standard_normal(2**level + 1) + 1j * gen.standard_normal(2**level + 1)
        n = int(gen.integers(1, 512))
        direct, abel = spectral.abel_segment_transform(values, interval, n)
        worst = max(worst, abs(direct - abel))
    if worst > 1e-12:
        raise AssertionError(f"Abel regrouping defect {worst:.2e}")
    return f"max regrouping defect = {worst:.2e}"


def _check_moments(seed: int) -> str:
    worst_z = 0.0
    for j in (0, 1):
        for p in (1.5, 2.0):
            mean, stderr = measure.weight_moment_mc(0.7, j, p, 10**5, seed=seed + j)
            z = abs(mean - measure.weight_moment(0.7, j, p)) / stderr
            worst_z = max(worst_z, z)
    if worst_z > 3.0:
        raise AssertionError(f"weight moment off by {worst_z:.2f} standard errors")
    return f"worst moment deviation = {worst_z:.2f} s.e."


def _check_decomposition(seed: int) -> str:
    grid = GridSpec(1024)
    hierarchy = sample_hierarchy(6, grid, seed)
    gamma, tau, n_max = 0.6, 0.4, 64
    worst = 0.0
    for k in range(1, 7):
        low = spectral.martingale_vector(
            spectral.fourier_coefficients(measure.chaos_density(hierarchy, gamma, k - 1), n_max), tau
        )
        high = spectral.martingale_vector(
            spectral.fourier_coefficients(measure.chaos_density(hierarchy, gamma, k), n_max), tau
        )
        total = np.zeros(n_max, dtype=complex)
        for interval in spectral.dyadic_family(k - 1):
            total += spectral.localized_vector(hierarchy, gamma, interval, tau, n_max).values
        worst = max(worst, float(np.max(np.abs(total - (high.weighted - low.weighted)))))
    if worst > 1e-10:
        raise AssertionError(f"increment decomposition defect {worst:.2e}")
    return f"max increment defect = {worst:.2e}"


def _check_exponents() -> str:
    worst = 0.0
    p_grid = np.arange(1.0 + 1e-5, 2.0 + 1e-12, 1e-5)
    for gamma in np.linspace(0.05, 1.35, 10):
        values = 2.0 + gamma**2 - gamma**2 * p_grid - 2.0 / p_grid
        worst = max(worst, abs(float(values.max()) - estimators.fourier_dimension(gamma)))
    if worst > 1e-8:
        raise AssertionError(f"dimension vs grid search defect {worst:.2e}")
    return f"max sup-search defect = {worst:.2e}"


def cmd_verify(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else 20240
    checks = [
        ("geometry_oracle_agreement", _check_geometry_oracle),
        ("geometry_telescoping", _check_telescoping),
        ("geometry_branch_continuity", _check_branch_continuity),
        ("embedding_exactness", _check_embedding),
        ("product_difference_identity", lambda: _check_product_identity(seed)),
        ("abel_regrouping_identity", lambda: _check_abel(seed)),
        ("weight_moments", lambda: _check_moments(seed)),
        ("increment_decomposition", lambda: _check_decomposition(seed)),
        ("exponent_formulas", _check_exponents),
    ]
    failures = 0
    for name, check in checks:
        try:
            detail = check()
            print(f"PASS {name}: {detail}")
        except Exception as exc:  # report and keep going
            failures += 1
            print(f"FAIL {name}: {exc}")
    return 0 if failures == 0 else 1


# ---------------------------------------------------------------------------
# simulate / spectrum / dims / clt / report


def cmd_simulate(args: argparse.Namespace) -> int:
    opts = _resolve(
        args,
        {
            "gamma": (float, _REQUIRED),
            "m": (int, _REQUIRED),
            "grid": (int, _REQUIRED),
            "seed": (int, 0),
            "out": (str, "."),
        },
    )
    grid = GridSpec(opts["grid"])
    hierarchy = sample_hierarchy(opts["m"], grid, opts["seed"])
    density = measure.chaos_density(hierarchy, opts["gamma"])
    spectrum = spectral.fourier_coefficients(density, grid.size // spectral.NYQUIST_FRACTION)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    measure.write_density_csv(density, out / "density.csv")
    spectral.write_spectrum_csv(spectrum, out / "spectrum.csv")
    print(f"wrote {out / 'density.csv'} and {out / 'spectrum.csv'}")
    return 0


def _ensemble_options(extra: dict) -> dict:
    base = {
        "gamma": (float, _REQUIRED),
        "m": (int, _REQUIRED),
        "grid": (int, _REQUIRED),
        "nmax": (int, _REQUIRED),
        "reps": (int, _REQUIRED),
        "seed": (int, 0),
        "stat": (str, "median"),
        "tau": (float, 0.0),
    }
    base.update(extra)
    return base


def _build_config(opts: dict, **overrides) -> harness.ExperimentConfig:
    return harness.ExperimentConfig(
        gamma=opts["gamma"],
        depth=opts["m"],
        grid_size=opts["grid"],
        n_max=opts["nmax"],
        tau=opts.get("tau", 0.0),
        replicas=opts["reps"],
        seed=opts["seed"],
        statistic=opts.get("stat", "median"),
        **overrides,
    )


def cmd_spectrum(args: argparse.Namespace) -> int:
    opts = _resolve(args, _ensemble_options({"out": (str, _REQUIRED), "format": (str, "csv")}))
    config = _build_config(opts, out=opts["out"], fmt=opts["format"])
    result = harness.run_ensemble(config, workers=args.workers)
    if opts["format"] == "json":
        harness.export_result(result, "json", opts["out"])
    else:
        _write_ensemble_spectrum_csv(result, opts["out"])
    print(f"wrote {opts['out']}")
    return 0


def _write_ensemble_spectrum_csv(result: harness.EnsembleResult, path) -> None:
    """Per-frequency table (n, re, im, abs2[, quantile_50])."""
    config = result.config
    mean = result.coeff_sum / result.count
    abs2 = result.abs2_sum / result.count
    medians = None
    if config.statistic == "median":
        medians = {a: float(np.median(result.reservoirs[a].value)) for a in result.reservoirs}
    with open(path, "w", newline="") as fh:
        header = "n,re,im,abs2"
        fh.write(header + (",quantile_50\n" if medians is not None else "\n"))
        for n in range(1, config.n_max + 1):
            row = f"{n},{float(mean[n - 1].real)!r},{float(mean[n - 1].imag)!r},{float(abs2[n - 1])!r}"
            if medians is not None:
                row += f",{medians[int(math.log2(n))]!r}"
            fh.write(row + "\n")


def cmd_dims(args: argparse.Namespace) -> int:
    opts = _resolve(
        args,
        _ensemble_options(
            {
                "fit_lo": (int, 8),
                "fit_hi": (int, None),
                "level_lo": (int, 2),
                "level_hi": (int, None),
            }
        ),
    )
    grid_log2 = GridSpec(opts["grid"]).log2_size
    level_hi = opts["level_hi"] if opts["level_hi"] is not None else min(8, grid_log2)
    levels = tuple(range(opts["level_lo"], level_hi + 1))
    config = _build_config(opts, mass_levels=levels)
    result = harness.run_ensemble(config, workers=args.workers)
    decay = harness.decay_fit_from_result(result, opts["fit_lo"], opts["fit_hi"])
    l2 = harness.l2_fit_from_result(result)
    payload = {
        "version": harness.VERSION,
        "config": harness.config_to_dict(config),
        "fourier_dimension": estimators.fourier_dimension(opts["gamma"]),
        "correlation_dimension": estimators.correlation_dimension(opts["gamma"]),
        "decay": estimators.slope_fit_to_dict(decay),
        "l2": estimators.slope_fit_to_dict(l2),
    }
    print(json.dumps(payload, indent=2))
    return 0


def cmd_clt(args: argparse.Namespace) -> int:
    opts = _resolve(
        args,
        _ensemble_options(
            {"out": (str, _REQUIRED), "block_lo": (int, 6), "block_hi": (int, 10)}
        ),
    )
    config = _build_config(opts)
    result = harness.run_ensemble(config, workers=args.workers)
    profile = harness.clt_profile_from_result(result, opts["block_lo"], opts["block_hi"])
    estimators.write_profile_csv(profile, opts["out"])
    print(f"wrote {opts['out']}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    result = harness.load_result(args.infile)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    harness.export_result(result, "csv", out / "blocks.csv")
    decay = harness.decay_fit_from_result(result, args.fit_lo, args.fit_hi)
    estimators.write_slope_csv(decay, out / "slopes.csv")
    summary = {
        "version": harness.VERSION,
        "config": harness.config_to_dict(result.config),
        "count": result.count,
        "fourier_dimension": estimators.fourier_dimension(result.config.gamma),
        "decay": estimators.slope_fit_to_dict(decay),
    }
    if result.config.mass_levels:
        summary["l2"] = estimators.slope_fit_to_dict(harness.l2_fit_from_result(result))
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out / 'blocks.csv'}, {out / 'slopes.csv'} and {out / 'summary.json'}")
    return 0


# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file; flags override")
    parser.add_argument("--workers", type=int, default=None, help="parallel replica workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmchaos", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the exact/closed-form suites")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="one replica; dump density and spectrum CSV")
    _add_common(p)
    p.add_argument("--gamma", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    def ensemble_parser(name: str, help_text: str) -> argparse.ArgumentParser:
        q = sub.add_parser(name, help=help_text)
        _add_common(q)
        q.add_argument("--gamma", type=float)
        q.add_argument("--m", type=int)
        q.add_argument("--grid", type=int)
        q.add_argument("--nmax", type=int)
        q.add_argument("--reps", type=int)
        q.add_argument("--seed", type=int)
        q.add_argument("--stat", choices=("mean", "median"))
        q.add_argument("--tau", type=float)
        return q

    p = ensemble_parser("spectrum", "ensemble spectral statistics")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.set_defaults(func=cmd_spectrum)

    p = ensemble_parser("dims", "slope estimates and closed-form exponents as JSON")
    p.add_argument("--fit-lo", dest="fit_lo", type=int)
    p.add_argument("--fit-hi", dest="fit_hi", type=int)
    p.add_argument("--level-lo", dest="level_lo", type=int)
    p.add_argument("--level-hi", dest="level_hi", type=int)
    p.set_defaults(func=cmd_dims)

    p = ensemble_parser("clt", "rescaled-coefficient variance profile CSV")
    p.add_argument("--out")
    p.add_argument("--block-lo", dest="block_lo", type=int)
    p.add_argument("--block-hi", dest="block_hi", type=int)
    p.set_defaults(func=cmd_clt)

    p = sub.add_parser("report", help="re-derive fits from an archived ensemble JSON")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fit-lo", dest="fit_lo", type=int, default=None)
    p.add_argument("--fit-hi", dest="fit_hi", type=int, default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
