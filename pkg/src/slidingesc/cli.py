"""Command-line entry point: run scenarios, verify the build, sweep
parameters.

Commands
--------
run     simulate one scenario; writes trajectory.csv, metrics.json and
        gnuplot-ready data files into the output directory.
verify  execute the oracle / scenario / sweep suites and print a
        pass-fail table.
sweep   repeat a scenario over a list of values for one numeric field,
        writing per-value runs plus an aggregated metrics table.

Exit codes: 0 success, 1 failed checks or aborted run, 2 usage or
configuration error, 3 missing input file.  The default output
directory is $SLIDINGESC_OUT, else ./out.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import convergence_metrics
from .errors import ConfigurationError, SimulationAbort
from .scenario import (ScenarioError, apply_override, builtin_scenario_dict,
                       builtin_scenario_names, get_field, scenario_from_dict)
from .sim import run as run_sim
from .verify import composition_check, oracle_suite, scenario_suite, sweep_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _default_out() -> str:
    return os.environ.get("SLIDINGESC_OUT", "out")


def _load_scenario_document(args) -> dict:
    if args.config is None:
        return builtin_scenario_dict("coupled_bowl")
    path = Path(args.config)
    if not path.exists():
        raise FileNotFoundError(f"scenario file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _scenario_from_args(args):
    data = _load_scenario_document(args)
    for item in args.override or []:
        key, _, raw = item.partition("=")
        if not _ or not key:
            raise ScenarioError(
                f"override {item!r} must have the form key.path=value")
        apply_override(data, key, raw)
    return data, scenario_from_dict(data, allow_unstable=args.allow_unstable)


def _write_plot_data(outdir: Path, traj, plant) -> None:
    """Plotter-agnostic whitespace tables for the four standard views."""
    n = traj.z.shape[1]
    m = traj.u.shape[1]

    header = "t " + " ".join(f"z{i+1}" for i in range(n)) + " y y_m"
    np.savetxt(outdir / "output_vs_time.dat",
               np.column_stack([traj.t, traj.z, traj.y, traj.y_m]),
               header=header, comments="# ")

    if n == 2:
        np.savetxt(outdir / "phase_plane.dat",
                   np.column_stack([traj.z[:, 0], traj.z[:, 1]]),
                   header=f"z1 z2   (maximizer at {plant.map.z_star.tolist()})",
                   comments="# ")

    header = ("t " + " ".join(f"u{i+1}" for i in range(m)) + " "
              + " ".join(f"sigma{i+1}" for i in range(m)))
    sigma = np.zeros((len(traj), m))
    sigma[np.arange(len(traj)), traj.dir_index.astype(int) - 1] = 1.0
    np.savetxt(outdir / "control_signals.dat",
               np.column_stack([traj.t, traj.u, sigma]),
               header=header, comments="# ")

    if n == 2:
        span = max(2.0, float(np.abs(traj.z).max()) * 1.1)
        grid = np.linspace(-span, span, 61)
        with open(outdir / "objective_surface.dat", "w", encoding="utf-8") as fh:
            fh.write("# z1 z2 h(z)   gnuplot splot blocks\n")
            for z1 in grid:
                for z2 in grid:
                    fh.write(f"{z1:.6g} {z2:.6g} "
                             f"{plant.map.eval(np.array([z1, z2])):.6g}\n")
                fh.write("\n")
        stride = max(1, len(traj) // 2000)
        np.savetxt(outdir / "output_path_3d.dat",
                   np.column_stack([traj.z[::stride, 0], traj.z[::stride, 1],
                                    traj.y[::stride]]),
                   header="z1 z2 y", comments="# ")


def _run_one(data: dict, scenario, outdir: Path, *, backend: str,
             dt_guard: bool, skip_hypothesis_check: bool) -> dict:
    outdir.mkdir(parents=True, exist_ok=True)
    plant = scenario.build_plant()
    traj = run_sim(plant, scenario.controller, scenario.sim, backend=backend,
                   dt_guard=dt_guard,
                   skip_hypothesis_check=skip_hypothesis_check)
    metrics = convergence_metrics(
        traj, plant.map.z_star, plant.map.y_star,
        epsilon_sw=scenario.controller.epsilon_sw,
        delta=scenario.analysis.delta,
        trailing_fraction=scenario.analysis.trailing_fraction,
        min_duration=50.0 * scenario.sim.dt)
    traj.to_csv(outdir / "trajectory.csv")
    with open(outdir / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(metrics.to_flat_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(outdir / "scenario.json", "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
    _write_plot_data(outdir, traj, plant)
    return metrics.to_flat_dict()


def cmd_run(args) -> int:
    data, scenario = _scenario_from_args(args)
    outdir = Path(args.out)
    flat = _run_one(data, scenario, outdir, backend=args.backend,
                    dt_guard=args.dt_guard != "off",
                    skip_hypothesis_check=args.allow_unstable)
    print(f"run complete: {scenario.name}")
    for key in ("t_reach_delta", "residual_amp", "mean_residual", "bounded"):
        print(f"  {key}: {flat[key]}")
    print(f"  outputs in {outdir}")
    return EXIT_OK


def _print_table(results) -> bool:
    width = max(len(r.name) for r in results)
    all_pass = True
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        all_pass &= r.passed
        print(f"  [{mark}] {r.name:<{width}}  {r.detail}  ({r.elapsed:.2f}s)")
    return all_pass


def cmd_verify(args) -> int:
    suites = []
    if args.suite in ("oracles", "all"):
        suites.append(("oracle suite", lambda: oracle_suite()
                       + [composition_check()]))
    if args.suite in ("scenarios", "all"):
        suites.append(("scenario suite", scenario_suite))
    if args.suite in ("sweep", "all"):
        suites.append(("residual-scaling sweep", sweep_suite))
    all_pass = True
    for title, fn in suites:
        print(f"{title}:")
        all_pass &= _print_table(fn())
    print("VERIFY:", "all checks passed" if all_pass else "FAILURES above")
    return EXIT_OK if all_pass else EXIT_FAIL


def _sweep_worker(payload):
    raw, value_repr, out, backend, dt_guard, allow_unstable = payload
    scenario = scenario_from_dict(raw, allow_unstable=allow_unstable)
    flat = _run_one(raw, scenario, Path(out), backend=backend,
                    dt_guard=dt_guard,
                    skip_hypothesis_check=allow_unstable)
    flat["value"] = value_repr
    return flat


def cmd_sweep(args) -> int:
    data, _ = _scenario_from_args(args)
    values = [v for v in (args.values or "").split(",") if v.strip()]
    if not values:
        print("error: sweep needs a nonempty comma-separated --values list",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        current = get_field(data, args.param)
    except ScenarioError as exc:
        print(f"error: unknown sweep parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    numeric_or_null = (current is None
                       or (isinstance(current, (int, float))
                           and not isinstance(current, bool)))
    if not numeric_or_null:
        print(f"error: sweep parameter {args.param} is not numeric "
              f"(current value {current!r})", file=sys.stderr)
        return EXIT_USAGE

    outroot = Path(args.out)
    jobs = []
    for value in values:
        raw = json.loads(json.dumps(data))
        apply_override(raw, args.param, value)
        scenario_from_dict(raw, allow_unstable=args.allow_unstable)  # validate now
        subdir = outroot / f"{args.param.replace('.', '_')}={value}"
        jobs.append((raw, value, str(subdir), args.backend,
                     args.dt_guard != "off", args.allow_unstable))

    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_worker, jobs))
    else:
        rows = [_sweep_worker(job) for job in jobs]

    outroot.mkdir(parents=True, exist_ok=True)
    table_path = outroot / "sweep_metrics.csv"
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write("value,t_reach_delta,residual_amp,mean_residual,bounded\n")
        for row in rows:
            fh.write(f"{row['value']},{row['t_reach_delta']},"
                     f"{row['residual_amp']:.17g},{row['mean_residual']:.17g},"
                     f"{row['bounded']}\n")
    print(f"sweep of {args.param} over {values}:")
    for row in rows:
        print(f"  {args.param}={row['value']}: residual_amp="
              f"{row['residual_amp']:.6g} mean_residual="
              f"{row['mean_residual']:.6g} t_reach_delta={row['t_reach_delta']}")
    print(f"  table written to {table_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slidingesc",
        description="Sliding-mode extremum seeking: simulate, verify, sweep.")
    parser.add_argument("--log-level", default="WARNING",
                        help="python logging level (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None,
                       help="scenario JSON path (default: builtin "
                            f"coupled_bowl; builtins: "
                            f"{', '.join(builtin_scenario_names())})")
        p.add_argument("--out", default=_default_out(),
                       help="output directory (default $SLIDINGESC_OUT or ./out)")
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="dot-path override into the scenario, repeatable "
                            "(e.g. --override sim.dt=5e-4)")
        p.add_argument("--allow-unstable", action="store_true",
                       help="accept a non-Hurwitz A and failed hypothesis "
                            "checks (logged prominently)")
        p.add_argument("--dt-guard", choices=("on", "off"), default="on",
                       help="step-size resolution guard (default on)")
        p.add_argument("--backend", choices=("auto", "python", "numba"),
                       default="auto", help="integration backend")

    p_run = sub.add_parser("run", help="simulate one scenario")
    add_common(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_verify = sub.add_parser("verify", help="run verification suites")
    p_verify.add_argument("suite", nargs="?", default="all",
                          choices=("oracles", "scenarios", "sweep", "all"))
    p_verify.set_defaults(fn=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="run a scenario over a value list")
    add_common(p_sweep)
    p_sweep.add_argument("--param", required=True,
                         help="dot-path of a numeric scenario field "
                              "(e.g. sim.plant_eta)")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values")
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="parallel runs (default 1)")
    p_sweep.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(),
                                      logging.WARNING))
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ScenarioError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
