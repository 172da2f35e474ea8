"""Command-line entry point.

Subcommands: estimate | bounds | infer | simulate | coverage.  Parameters
resolve in three layers: built-in defaults, then a JSON --config file,
then explicit flags.  Every run writes a long-format CSV plus a JSON
sidecar, both carrying the fully resolved configuration, so artifacts are
reproducible from their own headers.

Exit codes: 0 success, 1 configuration or data errors, 2 model rejection
(the envelope crossing test fired on the estimated tables).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .bounds import cost_bounds_if, cost_bounds_pf, random_cost_bounds, testability_if
from .coverage import run_coverage
from .envelopes import envelope_table
from .errors import ConfigError, RoyBoundsError
from .estimation import estimate_tables, silverman_bandwidth
from .inference import confidence_band
from .model import DgpSpec, EvaluationGrid, generate_sample
from .reporting import (
    cost_survival,
    ingest_csv,
    json_ready,
    write_band_csv,
    write_if_curve_csv,
    write_json_sidecar,
    write_random_cost_csv,
    write_sample_csv,
    write_surface_csv,
    write_survival_csv,
    write_table_csv,
)

_DEFAULTS = dict(
    input=None, output=None, bandwidth=None, alpha=0.05, bootstrap=200,
    seed=0, epsilon=None, grid_y=200, grid_z=8, mode="pf", crossing_tol=None,
    cost_points=41, cost_max=None, side="lower", z_bins=None, n=1000,
    reps=200, workers=None, dgp=None, subset_indices=None,
)


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: str | None = None
    output: str | None = None
    bandwidth: float | None = None
    alpha: float = 0.05
    bootstrap: int = 200
    seed: int = 0
    epsilon: float | None = None
    grid_y: int = 200
    grid_z: int = 8
    mode: str = "pf"
    crossing_tol: float | None = None
    cost_points: int = 41
    cost_max: float | None = None
    side: str = "lower"
    z_bins: list | None = None
    n: int = 1000
    reps: int = 200
    workers: int | None = None
    dgp: dict | None = None
    subset_indices: list | None = None

    def validate(self) -> None:
        if self.output is None:
            raise ConfigError("an --output path is required")
        if not 0.0 < self.alpha <= 0.5:
            raise ConfigError(f"alpha must lie in (0, 0.5], got {self.alpha}")
        if self.bootstrap < 50:
            raise ConfigError(f"bootstrap count must be at least 50, got {self.bootstrap}")
        if self.grid_y < 2:
            raise ConfigError("grid-y must be at least 2")
        if self.grid_z < 1:
            raise ConfigError("grid-z must be at least 1")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ConfigError("bandwidth must be positive")
        if self.epsilon is not None and self.epsilon < 0:
            raise ConfigError("epsilon must be nonnegative")
        if self.crossing_tol is not None and self.crossing_tol < 0:
            raise ConfigError("crossing tolerance must be nonnegative")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.reps < 1:
            raise ConfigError("replication count must be at least 1")
        if self.cost_points < 2:
            raise ConfigError("cost-points must be at least 2")
        if self.mode not in ("pf", "if", "random", "all"):
            raise ConfigError(f"unknown bounds mode {self.mode!r}")
        if self.side not in ("lower", "upper"):
            raise ConfigError(f"unknown band side {self.side!r}")
        if self.command in ("simulate", "coverage") and self.dgp is None:
            raise ConfigError(f"{self.command} needs a dgp section in the config file")

    def echo(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        return json_ready(out)


def _load_config_file(path) -> dict:
    with open(path) as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(raw) - set(_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return raw


def build_config(args: argparse.Namespace) -> RunConfig:
    file_values = _load_config_file(args.config) if args.config else {}
    merged = {}
    for key, default in _DEFAULTS.items():
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
        elif key in file_values:
            merged[key] = file_values[key]
        else:
            merged[key] = default
    config = RunConfig(command=args.command, **merged)
    config.validate()
    return config


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", help="observation CSV with columns y,d,z")
    parser.add_argument("--output", help="primary CSV artifact path")
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--bandwidth", type=float, help="kernel bandwidth for z")
    parser.add_argument("--alpha", type=float, help="band significance level")
    parser.add_argument("--bootstrap", type=int, help="bootstrap replications")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--epsilon", type=float, help="fiber monotonization step")
    parser.add_argument("--grid-y", type=int, dest="grid_y", help="y grid points")
    parser.add_argument("--grid-z", type=int, dest="grid_z", help="z grid points")
    parser.add_argument("--workers", type=int, help="parallel workers (or env ROYBOUNDS_WORKERS)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roybounds",
        description="Partial-identification bounds on sector-choice costs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="conditional cdf tables from a sample")
    _add_common(p)

    p = sub.add_parser("bounds", help="cost bounds from a sample")
    _add_common(p)
    p.add_argument("--mode", choices=["pf", "if", "random", "all"],
                   help="bound construction (default pf)")
    p.add_argument("--crossing-tol", type=float, dest="crossing_tol",
                   help="envelope crossing tolerance")
    p.add_argument("--cost-points", type=int, dest="cost_points",
                   help="cost grid size for random mode")
    p.add_argument("--cost-max", type=float, dest="cost_max",
                   help="cost grid upper end for random mode")

    p = sub.add_parser("infer", help="one-sided uniform confidence band")
    _add_common(p)
    p.add_argument("--side", choices=["lower", "upper"], help="band side")
    p.add_argument("--crossing-tol", type=float, dest="crossing_tol",
                   help="envelope crossing tolerance")
    p.add_argument("--z-bins", dest="z_bins", type=_float_list,
                   help="comma-separated z bin edges for the survival summary")

    p = sub.add_parser("simulate", help="draw a sample from a configured DGP")
    _add_common(p)
    p.add_argument("--n", type=int, help="sample size")

    p = sub.add_parser("coverage", help="Monte-Carlo coverage study")
    _add_common(p)
    p.add_argument("--n", type=int, help="per-replication sample size")
    p.add_argument("--reps", type=int, help="Monte-Carlo replications")
    return parser


def _float_list(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _tagged(path, tag: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + f".{tag}" + p.suffix)


def _require_input(config: RunConfig):
    if config.input is None:
        raise ConfigError(f"{config.command} needs an --input CSV")
    return ingest_csv(config.input)


def _crossing_tol(config: RunConfig, n: int) -> float:
    # estimated tables cross by sampling noise alone; the auto default
    # tracks the worst-case noise scale of kernel cdf differences, which
    # pilot runs put well under sqrt(log n / n) for valid designs
    if config.crossing_tol is not None:
        return config.crossing_tol
    n = max(int(n), 2)
    return float(np.sqrt(np.log(n) / n))


def _cmd_estimate(config: RunConfig) -> int:
    sample = _require_input(config)
    grid = EvaluationGrid.from_sample(sample, config.grid_y, config.grid_z)
    table = estimate_tables(sample, grid, config.bandwidth)
    echo = config.echo()
    write_table_csv(table, config.output, echo)
    write_json_sidecar(config.output, "tables", {
        "y_grid": grid.y, "z_grid": grid.z, "F": table.F, "F0": table.F0,
        "F1": table.F1, "p": table.p, "bandwidth": table.bandwidth,
        "n_obs": table.n_obs}, echo)
    return 0


def _cmd_bounds(config: RunConfig) -> int:
    sample = _require_input(config)
    grid = EvaluationGrid.from_sample(sample, config.grid_y, config.grid_z)
    echo = config.echo()
    modes = ("pf", "if", "random") if config.mode == "all" else (config.mode,)
    status = 0
    for mode in modes:
        out = _tagged(config.output, mode) if config.mode == "all" else Path(config.output)
        if mode == "pf":
            table = estimate_tables(sample, grid, config.bandwidth)
            surface = cost_bounds_pf(table, sample.lower_support_bound,
                                     crossing_tol=_crossing_tol(config, sample.n))
            write_surface_csv(surface, out, echo)
            write_json_sidecar(out, "bound_surface", {
                "y_grid": grid.y, "z_grid": grid.z, "clow": surface.Clow,
                "chigh": surface.Chigh, "identified": surface.identified_mask,
                "crossing_rejected": surface.crossing.rejected,
                "crossing_worst_gap": surface.crossing.worst_gap,
                "crossing_tol": surface.crossing.tol,
                "sandwich_rejected": surface.sandwich_crossing.rejected,
                "identification_tol": surface.identification_tol}, echo)
            if surface.rejected:
                status = 2
        elif mode == "if":
            curve = cost_bounds_if(sample, grid.z, config.bandwidth)
            report = testability_if(curve)
            write_if_curve_csv(curve, out, echo)
            write_json_sidecar(out, "if_bound_curve", {
                "z_grid": curve.z_grid, "m": curve.m, "m0b": curve.m0b,
                "p": curve.p, "clow": curve.Clow, "chigh": curve.Chigh,
                "p_tol": curve.p_tol,
                "testability_rejected": report.rejected,
                "testability_worst": report.worst_violation}, echo)
        else:
            table = estimate_tables(sample, grid, config.bandwidth)
            top = config.cost_max
            if top is None:
                top = float(grid.y[-1] - grid.y[0])
            cost_grid = np.linspace(0.0, top, config.cost_points)
            rc = random_cost_bounds(table, cost_grid, sample.lower_support_bound)
            write_random_cost_csv(rc, out, echo)
            write_json_sidecar(out, "random_cost_bounds", {
                "cost_grid": rc.cost_grid, "z_grid": rc.z_grid, "FL": rc.FL,
                "FU": rc.FU, "identified_z": rc.identified_z,
                "p_tol": rc.p_tol}, echo)
    return status


def _cmd_infer(config: RunConfig) -> int:
    sample = _require_input(config)
    grid = EvaluationGrid.from_sample(sample, config.grid_y, config.grid_z)
    echo = config.echo()
    table = estimate_tables(sample, grid, config.bandwidth)
    surface = cost_bounds_pf(table, sample.lower_support_bound,
                             crossing_tol=_crossing_tol(config, sample.n))
    band = confidence_band(sample, grid, bandwidth=config.bandwidth,
                           alpha=config.alpha, B=config.bootstrap,
                           seed=config.seed, epsilon=config.epsilon,
                           subset_indices=config.subset_indices,
                           side=config.side, workers=config.workers)
    write_band_csv(band, config.output, echo)
    write_json_sidecar(config.output, "confidence_band", {
        "y_grid": grid.y, "z_grid": grid.z, "Cn": band.Cn,
        "estimate": band.Chat, "se": band.se,
        "critical_value": band.critical_value,
        "identified": band.identified_mask, "alpha": band.alpha,
        "B": band.B, "seed": band.seed, "epsilon": band.epsilon,
        "bandwidth": band.bandwidth, "side": band.side,
        "subset_indices": list(band.subset_indices),
        "crossing_rejected": surface.rejected}, echo)
    z_bins = np.asarray(config.z_bins, dtype=float) if config.z_bins else None
    summary = cost_survival(band, sample, z_bins=z_bins)
    survival_out = _tagged(config.output, "survival")
    write_survival_csv(summary, survival_out, echo)
    from .reporting import survival_to_dict
    write_json_sidecar(survival_out, "survival_summary",
                       survival_to_dict(summary), echo)
    return 2 if surface.rejected else 0


def _cmd_simulate(config: RunConfig) -> int:
    dgp = DgpSpec.from_json(config.dgp)
    sample = generate_sample(dgp, config.n, config.seed)
    echo = config.echo()
    write_sample_csv(sample, config.output, echo)
    write_json_sidecar(config.output, "sample", {
        "n": sample.n, "lower_support_bound": sample.lower_support_bound,
        "dgp": dgp.to_json()}, echo)
    return 0


def _cmd_coverage(config: RunConfig) -> int:
    dgp = DgpSpec.from_json(config.dgp)
    report = run_coverage(dgp, config.reps, config.n, alpha=config.alpha,
                          B=config.bootstrap, seed=config.seed,
                          bandwidth=config.bandwidth, epsilon=config.epsilon,
                          workers=config.workers)
    echo = config.echo()
    from .reporting import _open_writer, fmt
    handle, writer = _open_writer(config.output, echo)
    with handle:
        writer.writerow(["y", "z", "coverage_vs_lower", "coverage_vs_cost", "count"])
        for iz, zv in enumerate(report.grid.z):
            for iy, yv in enumerate(report.grid.y):
                writer.writerow([fmt(yv), fmt(zv),
                                 fmt(report.pointwise_vs_lower[iy, iz]),
                                 fmt(report.pointwise_vs_cost[iy, iz]),
                                 fmt(report.cell_counts[iy, iz])])
    write_json_sidecar(config.output, "coverage_report", report.to_dict(), echo)
    return 0


_COMMANDS = {
    "estimate": _cmd_estimate,
    "bounds": _cmd_bounds,
    "infer": _cmd_infer,
    "simulate": _cmd_simulate,
    "coverage": _cmd_coverage,
}


def run_command(config: RunConfig) -> int:
    config.validate()
    return _COMMANDS[config.command](config)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        config = build_config(args)
        return run_command(config)
    except RoyBoundsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
