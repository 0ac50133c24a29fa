"""Command-line interface.

Six subcommands cover the pipeline: ``simulate`` emits a measurement
file, ``estimate`` turns measurements into a state with covariance,
``montecarlo`` runs the RMSE sweep, ``crlb`` tabulates the lower
bound, ``bias`` runs the bias and uncertainty-comparison studies, and
``ellipsoid`` exports confidence ellipsoids for both estimators.

Conventions: machine-readable results go to files in --out or to
standard output; progress and diagnostics go to standard error. Exit
codes: 0 success, 1 invalid input, 2 estimation failure. Flags beat
scenario-file values, which beat built-in defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .crlb import crlb_bounds
from .errors import EstimationError, ValidationError
from .estimator import estimate, estimate_to_json_dict
from .measurement import (read_measurements_csv, simulate,
                          write_measurements_csv)
from .montecarlo import (bias_study, ellipsoid_export, rmse_sweep,
                         uncertainty_comparison, write_axis_histogram_csv,
                         write_axis_summary_csv, write_crlb_csv,
                         write_ellipsoid_json, write_rmse_csv)
from .scenario import (DEFAULT_SIGMA_GRID, ExperimentSpec, NoiseModel,
                       Scenario, builtin_scenario, experiment_from_dict,
                       load_experiment_spec, load_scenario)
from .trilateration import derive_ranges, trilaterate


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit 2; this package reserves 2
    for estimation failures, so route them through ValidationError."""

    def error(self, message):
        raise ValidationError(message)


def _add_common(parser) -> None:
    parser.add_argument("--scenario", metavar="PATH",
                        help="scenario JSON file (default: built-in scenario)")
    parser.add_argument("--out", metavar="DIR", default=".",
                        help="output directory for result files (default: .)")
    parser.add_argument("--sigma-t", type=float, default=None, metavar="SECONDS",
                        help="delay noise standard deviation in seconds")
    parser.add_argument("--seed", type=int, default=None, metavar="U64",
                        help="RNG seed, unsigned 64-bit integer")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="multistatic-iod",
                     description="One-shot orbit determination from "
                                 "simultaneous multistatic radar measurements.")
    sub = parser.add_subparsers(dest="subcommand", required=True,
                            parser_class=_Parser)

    p = sub.add_parser("simulate",
                       help="write a simulated measurements.csv")
    _add_common(p)
    p.add_argument("--run-index", type=int, default=0, metavar="N",
                   help="Monte Carlo run index selecting the noise draw (default: 0)")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("estimate",
                       help="estimate the target state, JSON to stdout")
    _add_common(p)
    p.add_argument("--measurements", metavar="PATH",
                   help="measurements CSV to estimate from "
                        "(default: simulate in memory)")
    p.set_defaults(handler=_cmd_estimate)

    p = sub.add_parser("montecarlo",
                       help="RMSE sweep over the noise grid, writes rmse.csv")
    _add_common(p)
    p.add_argument("--runs", type=int, default=None, metavar="N",
                   help="Monte Carlo runs per noise level (default: 1000)")
    p.add_argument("--estimators", metavar="NAMES", default=None,
                   help="comma-separated subset of wls,tri (default: both)")
    p.add_argument("--sigma-grid", metavar="SECONDS,..", default=None,
                   help="comma-separated delay-noise levels in seconds, "
                        "ascending (default: 1e-11..1e-6 decades)")
    p.add_argument("--workers", type=int, default=1, metavar="N",
                   help="parallel worker processes (default: 1)")
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG figure rendering")
    p.set_defaults(handler=_cmd_montecarlo)

    p = sub.add_parser("crlb",
                       help="state accuracy lower bounds, writes crlb.csv")
    _add_common(p)
    p.add_argument("--sigma-grid", metavar="SECONDS,..", default=None,
                   help="comma-separated delay-noise levels in seconds "
                        "(default: --sigma-t alone, or the built-in grid)")
    p.set_defaults(handler=_cmd_crlb)

    p = sub.add_parser("bias",
                       help="bias and uncertainty-comparison studies, "
                            "writes bias.csv and sigma_diff.csv")
    _add_common(p)
    p.add_argument("--runs", type=int, default=20000, metavar="N",
                   help="Monte Carlo runs (default: 20000)")
    p.add_argument("--workers", type=int, default=1, metavar="N",
                   help="parallel worker processes (default: 1)")
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG figure rendering")
    p.set_defaults(handler=_cmd_bias)

    p = sub.add_parser("ellipsoid",
                       help="confidence ellipsoids for both estimators, "
                            "writes ellipsoid.json")
    _add_common(p)
    p.add_argument("--confidence", type=float, default=0.95, metavar="P",
                   help="ellipsoid confidence level in (0, 1) (default: 0.95)")
    p.add_argument("--run-index", type=int, default=0, metavar="N",
                   help="noise draw index for the underlying estimate (default: 0)")
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG figure rendering")
    p.set_defaults(handler=_cmd_ellipsoid)
    return parser


def _resolve_scenario(args) -> Scenario:
    if args.scenario:
        scenario = load_scenario(args.scenario)
    else:
        scenario = builtin_scenario()
    updates = {}
    if args.sigma_t is not None:
        updates["sigma_t_s"] = args.sigma_t
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    noise = dataclasses.replace(scenario.noise, **updates) if updates else scenario.noise
    return Scenario(scenario.network, scenario.target, noise)


def _resolve_experiment(args) -> ExperimentSpec:
    overrides = {
        "runs": getattr(args, "runs", None),
        "confidence": getattr(args, "confidence", None),
    }
    grid = getattr(args, "sigma_grid", None)
    if grid is not None:
        overrides["sigma_grid"] = _parse_grid(grid)
    names = getattr(args, "estimators", None)
    if names is not None:
        overrides["estimators"] = tuple(
            n for n in (s.strip() for s in names.split(",")) if n)
    if args.scenario:
        return load_experiment_spec(args.scenario, **overrides)
    return experiment_from_dict({}, **overrides)


def _parse_grid(text: str) -> tuple:
    try:
        return tuple(float(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise ValidationError(f"bad sigma grid {text!r}") from None


def _ensure_out(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _cmd_simulate(args) -> int:
    scenario = _resolve_scenario(args)
    out = _ensure_out(args)
    measured = simulate(scenario.network, scenario.target, scenario.noise,
                        args.run_index)
    path = os.path.join(out, "measurements.csv")
    write_measurements_csv(path, measured)
    print(f"wrote {path} ({measured.m}x{measured.n} pairs, "
          f"sigma_t={scenario.noise.sigma_t_s:g} s)", file=sys.stderr)
    return 0


def _cmd_estimate(args) -> int:
    scenario = _resolve_scenario(args)
    if args.measurements:
        measured = read_measurements_csv(args.measurements, scenario.network,
                                         scenario.noise)
    else:
        measured = simulate(scenario.network, scenario.target, scenario.noise, 0)
    result = estimate(scenario.network, measured)
    diag = result.diagnostics
    print(f"stage-1 condition {max(diag.condition_stage1):.3e}, "
          f"stage-2 condition {diag.condition_stage2:.3e}, "
          f"correction {diag.correction_position_m:.3e} m "
          f"/ {diag.correction_velocity_mps:.3e} m/s", file=sys.stderr)
    json.dump(estimate_to_json_dict(result), sys.stdout, indent=2)
    print()
    return 0


def _cmd_montecarlo(args) -> int:
    scenario = _resolve_scenario(args)
    spec = _resolve_experiment(args)
    out = _ensure_out(args)
    rows = rmse_sweep(scenario, spec, workers=args.workers)
    path = os.path.join(out, "rmse.csv")
    write_rmse_csv(path, rows)
    for row in rows:
        if row.flagged:
            print(f"warning: {row.estimator} failed {row.failures}/{row.runs} "
                  f"runs at sigma_t={row.sigma_t_s:g} s", file=sys.stderr)
    written = [path]
    if not args.no_figures:
        from .figures import render_rmse_figures
        written += render_rmse_figures(rows, os.path.join(out, ""))
    print("wrote " + ", ".join(written), file=sys.stderr)
    return 0


def _cmd_crlb(args) -> int:
    scenario = _resolve_scenario(args)
    out = _ensure_out(args)
    if args.sigma_grid is not None:
        grid = _parse_grid(args.sigma_grid)
    elif args.sigma_t is not None:
        grid = (args.sigma_t,)
    else:
        grid = DEFAULT_SIGMA_GRID
    rows = []
    for sigma in grid:
        noise = dataclasses.replace(scenario.noise, sigma_t_s=sigma)
        rows.append((sigma, crlb_bounds(scenario.network, scenario.target, noise)))
    path = os.path.join(out, "crlb.csv")
    write_crlb_csv(path, rows)
    for sigma, bound in rows:
        json.dump({"sigma_t_s": sigma,
                   "pos_bound_m": bound.position_m,
                   "vel_bound_mps": bound.velocity_mps}, sys.stdout)
        print()
    print(f"wrote {path}", file=sys.stderr)
    return 0


def _cmd_bias(args) -> int:
    scenario = _resolve_scenario(args)
    out = _ensure_out(args)
    sigma = scenario.noise.sigma_t_s
    bias = bias_study(scenario, sigma, args.runs, workers=args.workers)
    write_axis_summary_csv(os.path.join(out, "bias.csv"), bias.axes)
    write_axis_histogram_csv(os.path.join(out, "bias_hist.csv"), bias.axes)
    written = ["bias.csv", "bias_hist.csv"]
    comparison = None
    if scenario.network.m >= 3 and sigma > 0:
        comparison = uncertainty_comparison(scenario, sigma, args.runs,
                                            workers=args.workers)
        write_axis_summary_csv(os.path.join(out, "sigma_diff.csv"),
                               comparison.axes)
        write_axis_histogram_csv(os.path.join(out, "sigma_diff_hist.csv"),
                                 comparison.axes)
        written += ["sigma_diff.csv", "sigma_diff_hist.csv"]
    if not args.no_figures:
        from .figures import render_axis_histograms
        render_axis_histograms(
            bias.axes, f"estimation error, sigma_t={sigma:g} s",
            os.path.join(out, "bias_hist.png"))
        written.append("bias_hist.png")
        if comparison is not None:
            render_axis_histograms(
                comparison.axes,
                "reported sigma difference (two-stage minus trilateration)",
                os.path.join(out, "sigma_diff_hist.png"))
            written.append("sigma_diff_hist.png")
    if bias.failures:
        print(f"warning: {bias.failures}/{bias.runs} runs failed", file=sys.stderr)
    print("wrote " + ", ".join(os.path.join(out, w) for w in written),
          file=sys.stderr)
    return 0


def _cmd_ellipsoid(args) -> int:
    scenario = _resolve_scenario(args)
    out = _ensure_out(args)
    network, truth, noise = scenario
    measured = simulate(network, truth, noise, args.run_index)
    wls = estimate(network, measured)
    specs = {"wls": ellipsoid_export(wls.state.position_m, wls.covariance,
                                     args.confidence)}
    if network.m >= 3:
        ranges = derive_ranges(network, truth, noise, args.run_index)
        tri = trilaterate(network, ranges)
        specs["tri"] = ellipsoid_export(tri.state.position_m, tri.covariance,
                                        args.confidence)
    path = os.path.join(out, "ellipsoid.json")
    write_ellipsoid_json(path, specs)
    written = [path]
    if not args.no_figures:
        from .figures import render_ellipsoids
        written.append(render_ellipsoids(specs, os.path.join(out, "ellipsoid.png")))
    for name, spec in sorted(specs.items()):
        print(f"{name}: semi-axes {np.array2string(spec.semi_axes_m, precision=4)} m,"
              f" volume {spec.volume_m3:.6e} m^3", file=sys.stderr)
    print("wrote " + ", ".join(written), file=sys.stderr)
    return 0


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        return args.handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EstimationError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
