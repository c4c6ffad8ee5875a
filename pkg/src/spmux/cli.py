"""Command-line front end: reproducible runs, sweeps, scaling tables, fits.

Every data-producing command writes a CSV (RFC-4180 quoting, one header
row, fixed column order) plus a JSON sidecar at ``<out>.json`` recording
the fully expanded configuration, seed, thread count and backend. The
sidecar is itself a loadable scenario: re-running against it reproduces
the CSV byte for byte.

Exit codes: 0 success, 2 usage, 3 configuration error, 4 model error
(e.g. unreachable target CAR), 5 I/O error. Failures print a one-line
JSON object ``{"error": {"category": ..., "message": ...}}`` to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import _kernels
from .analytic_model import (
    AnalyticParams,
    ScalingParams,
    analytic_mux_rate,
    fit_switch_transmission,
    fixed_car_enhancement,
    mux_car,
    scaling_with_n,
)
from .errors import (
    ConfigurationError,
    FitError,
    InvalidParameterError,
    NoSolutionError,
    ScenarioError,
    SpmuxError,
    UndefinedEstimateError,
)
from .estimators import estimate_car, estimate_g2, estimate_heralded_rate
from .mux_engine import BLOCK_PULSES, run_experiment
from .scenario import (
    CSV_COLUMNS,
    CurvePoint,
    Scenario,
    apply_sweep_value,
    curve_point_row,
    load_scenario,
)

_COLUMN_HELP = "CSV columns, in order: " + ", ".join(CSV_COLUMNS)


def _write_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(rows)


def _write_sidecar(path: Path, payload: dict) -> None:
    with open(Path(str(path) + ".json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _effective_scenario(args) -> Scenario:
    scenario = load_scenario(args.scenario)
    system = scenario.system
    if args.pulses is not None:
        system = system.with_pulses(args.pulses)
    if args.hbt:
        system = replace(system, hbt_enabled=True)
    seed = scenario.seed if args.seed is None else args.seed
    return replace(scenario, system=system, seed=seed)


def _analytic_predictions(system):
    params = [AnalyticParams.from_system_config(system, k)
              for k in range(system.n_sources)]
    probs = analytic_mux_rate(params, system.routing.order)
    try:
        car = mux_car(probs)
    except NoSolutionError:
        car = None
    return probs, car


def _mc_point(scenario: Scenario, args, stream: int, swept=None) -> CurvePoint:
    system = scenario.system
    probs, a_car = _analytic_predictions(system)
    point = CurvePoint(
        swept_value=swept,
        analytic_rate=probs.p_coincidence / system.repetition_period_s,
        analytic_car=a_car,
        analytic_coincidence_prob=probs.p_coincidence,
    )
    if args.analytic_only:
        return point
    tallies = run_experiment(system, scenario.seed, threads=args.threads,
                             backend=args.backend, stream=stream)
    rate = estimate_heralded_rate(tallies, system.repetition_period_s)
    point = replace(point, heralded_rate=rate,
                    coincidence_prob=tallies.coincidences / tallies.pulses)
    try:
        point = replace(point, car=estimate_car(tallies))
    except UndefinedEstimateError as exc:
        print(f"warning: {exc}", file=sys.stderr)
    if system.hbt_enabled:
        try:
            point = replace(
                point,
                g2_0=estimate_g2(tallies, 0, heralded=True),
                g2_plus=estimate_g2(tallies, +1, heralded=True),
                g2_minus=estimate_g2(tallies, -1, heralded=True),
            )
        except UndefinedEstimateError as exc:
            print(f"warning: {exc}", file=sys.stderr)
    return point


def _out_path(args, scenario: Scenario) -> Path:
    out = args.out or scenario.output
    if out is None:
        raise ScenarioError("no output path: pass --out or set 'output' "
                            "in the scenario", field="output")
    return Path(out)


def _sidecar_payload(args, scenario: Scenario, command: str) -> dict:
    return {
        "tool": "spmux",
        "command": command,
        "threads": args.threads,
        "backend": _kernels.get_backend(args.backend).NAME,
        "block_pulses": BLOCK_PULSES,
        "analytic_only": bool(args.analytic_only),
        "scenario": scenario.to_dict(),
    }


def cmd_run(args) -> int:
    scenario = _effective_scenario(args)
    out = _out_path(args, scenario)
    point = _mc_point(scenario, args, stream=0)
    _write_csv(out, [curve_point_row(point)])
    payload = _sidecar_payload(args, scenario, "run")
    if args.target_car is not None:
        system = scenario.system
        params = [AnalyticParams.from_system_config(system, k)
                  for k in range(system.n_sources)]
        first = system.routing.order[0]
        single = replace(params[first], switch_path_transmission=1.0)
        gain = fixed_car_enhancement(single, params, args.target_car,
                                     system.routing.order)
        payload["fixed_car_enhancement"] = {
            "target_car": args.target_car, "enhancement": gain}
        print(f"fixed-CAR enhancement at CAR={args.target_car}: {gain:.4f}")
    _write_sidecar(out, payload)
    if point.heralded_rate is not None:
        car = "n/a" if point.car is None else f"{point.car.value:.3f}"
        print(f"heralded rate {point.heralded_rate.value:.4g} /s, CAR {car} "
              f"(analytic rate {point.analytic_rate:.4g} /s)")
    print(f"wrote {out}")
    return 0


def cmd_sweep(args) -> int:
    scenario = _effective_scenario(args)
    if scenario.sweep is None:
        raise ScenarioError("sweep command needs a 'sweep' block in the "
                            "scenario", field="sweep")
    out = _out_path(args, scenario)
    rows = []
    for i, value in enumerate(scenario.sweep.values()):
        swept = apply_sweep_value(scenario, float(value))
        point = _mc_point(swept, args, stream=i, swept=float(value))
        rows.append(curve_point_row(point))
    _write_csv(out, rows)
    _write_sidecar(out, _sidecar_payload(args, scenario, "sweep"))
    print(f"wrote {out} ({len(rows)} points)")
    return 0


def cmd_scaling(args) -> int:
    if args.out is None:
        raise ScenarioError("scaling needs --out", field="output")
    out = Path(args.out)
    rows = []
    for n in range(1, args.max_sources + 1):
        result = scaling_with_n(ScalingParams(
            n_sources=n,
            per_stage_transmission=args.per_stage_transmission,
            herald_prob_per_source=args.herald_prob,
        ))
        rows.append([n, result.stages, repr(result.rate_factor),
                     repr(result.two_photon_gain)])
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n_sources", "stages", "rate_factor",
                         "two_photon_gain"])
        writer.writerows(rows)
    _write_sidecar(out, {
        "tool": "spmux",
        "command": "scaling",
        "per_stage_transmission": args.per_stage_transmission,
        "herald_prob_per_source": args.herald_prob,
        "max_sources": args.max_sources,
    })
    print(f"wrote {out}")
    return 0


def _read_points(path: Path):
    points = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rate = row.get("heralded_rate_per_s", "")
            car = row.get("car", "")
            if rate and car:
                points.append((float(rate), float(car)))
    return points


def cmd_fit(args) -> int:
    scenario = _effective_scenario(args)
    if args.out is None:
        raise ScenarioError("fit needs --out", field="output")
    points = _read_points(Path(args.points))
    if not points:
        raise FitError(f"no usable (rate, car) rows in {args.points}")
    template = AnalyticParams.from_system_config(scenario.system, 0)
    result = fit_switch_transmission(
        points, template, scenario.system.repetition_period_s)
    payload = {
        "tool": "spmux",
        "command": "fit",
        "points_file": str(args.points),
        "n_points": len(points),
        "fitted_transmission": result.transmission,
        "sse": result.sse,
        "at_bound": result.at_bound,
        "residuals": list(result.residuals),
        "scenario": scenario.to_dict(),
    }
    with open(Path(args.out), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    flag = " (pinned at bound)" if result.at_bound else ""
    print(f"fitted switch transmission {result.transmission:.4f}{flag}, "
          f"sse {result.sse:.4g}")
    print(f"wrote {args.out}")
    return 0


def _add_common(parser, scenario_required=True):
    parser.add_argument("--scenario", required=scenario_required,
                        help="scenario JSON (or a result sidecar) to load")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (unsigned 64-bit); overrides the scenario")
    parser.add_argument("--pulses", type=int, default=None,
                        help="override the scenario's pulse count")
    parser.add_argument("--out", default=None, help="output file path")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads (does not change results)")
    parser.add_argument("--analytic-only", action="store_true",
                        help="skip Monte Carlo; emit model predictions only")
    parser.add_argument("--hbt", action="store_true",
                        help="enable the two-detector output tap (g2 columns)")
    parser.add_argument("--backend", default=None,
                        choices=["auto", "numpy", "compiled"],
                        help="kernel backend (default: compiled if built)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spmux",
        description="Pulse-level simulator for spatially multiplexed "
                    "heralded single-photon sources.",
        epilog=_COLUMN_HELP,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single configuration -> one-row summary",
                           epilog=_COLUMN_HELP)
    _add_common(p_run)
    p_run.add_argument("--target-car", type=float, default=None,
                       help="also report the fixed-CAR rate enhancement at "
                            "this CAR")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="parameter sweep -> CSV curve",
                             epilog=_COLUMN_HELP)
    _add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_scaling = sub.add_parser(
        "scaling", help="projected rate factor versus source count")
    _add_common(p_scaling, scenario_required=False)
    p_scaling.add_argument("--per-stage-transmission", type=float, default=0.85)
    p_scaling.add_argument("--herald-prob", type=float, default=0.0,
                           help="per-source herald probability (0 = limit)")
    p_scaling.add_argument("--max-sources", type=int, default=8)
    p_scaling.set_defaults(func=cmd_scaling)

    p_fit = sub.add_parser(
        "fit", help="fit the switch transmission to (rate, CAR) data")
    _add_common(p_fit)
    p_fit.add_argument("--points", required=True,
                       help="CSV with heralded_rate_per_s and car columns")
    p_fit.set_defaults(func=cmd_fit)
    return parser


_CATEGORIES = (
    ((ScenarioError, ConfigurationError, InvalidParameterError), "config", 3),
    ((NoSolutionError, FitError, UndefinedEstimateError), "model", 4),
    ((OSError,), "io", 5),
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SpmuxError, OSError) as exc:
        for types, category, code in _CATEGORIES:
            if isinstance(exc, types):
                break
        else:
            category, code = "internal", 1
        err = {"category": category, "message": str(exc)}
        if isinstance(exc, ScenarioError) and exc.field:
            err["field"] = exc.field
        print(json.dumps({"error": err}), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
