"""Command-line interface.

    csvortex solve  --config run.json [--dump-fields] [--heatmap] [--report PATH]
    csvortex oracle --n 1 --metric flat --rmax 40 [--mu 1] [--nodes 8192] [--out FILE]
    csvortex verify --config run.json
    csvortex report report.json

Exit codes: 0 ok, 1 a check failed or the solver did not converge, 2 usage,
configuration or I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfiguration, load_config
from .grid import GridError
from .metric import MetricError, metric_from_dict
from .radial import RadialConvergenceError, RadialError, RadialProblem, fit_radial_decay, solve_radial
from .runner import check_writable, emit, format_checks, output_paths, run, verify

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2



def _config_with_overrides(args: argparse.Namespace) -> RunConfiguration:
    config = load_config(args.config)
    updates = {}
    if getattr(args, "dump_fields", False):
        updates["dump_fields"] = True
    if getattr(args, "heatmap", False):
        updates["heatmap"] = True
    if updates:
        outputs = config.outputs.model_copy(update=updates)
        config = config.model_copy(update={"outputs": outputs})
    return config


def _summary(report) -> str:
    obs = report.solve.observables
    lines = [
        f"converged: {report.solve.converged}  residual: {report.solve.residual:.3e}  "
        f"iterations: {report.solve.iterations}",
        f"flux: {obs.flux:.10g}  (2 pi n = {2 * math.pi * report.solve.solution.vortices.total_vorticity:.10g})",
        f"energy: {obs.energy:.10g}  max w: {obs.w_max:.3e}",
    ]
    return "\n".join(lines)


def cmd_solve(args: argparse.Namespace) -> int:
    config = _config_with_overrides(args)
    paths = output_paths(config, args.report)
    check_writable(paths)
    report = run(config)
    emit(report, paths)
    print(_summary(report))
    print(format_checks(report.checks))
    print(f"report written to {paths['report']}")
    return report.exit_code


def cmd_verify(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    report = verify(config)
    print(format_checks(report.checks))
    if args.report:
        emit(report, output_paths(config, args.report))
    return report.exit_code


def cmd_oracle(args: argparse.Namespace) -> int:
    params = json.loads(args.metric_params) if args.metric_params else {}
    metric = metric_from_dict({"family": args.metric, **params})
    problem = RadialProblem(n=args.n, mu=args.mu, metric=metric, r_max=args.rmax, nodes=args.nodes)
    profile = solve_radial(problem)
    if args.out:
        profile.to_csv(args.out)
    else:
        profile.to_csv(sys.stdout)
    info = f"flux {profile.flux:.12g}  energy {profile.energy:.12g}"
    try:
        info += f"  decay rate {fit_radial_decay(profile).rate:.6g}"
    except RadialError as exc:
        info += f"  decay fit unavailable ({exc})"
    print(info, file=sys.stderr)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    data = json.loads(Path(args.path).read_text(encoding="utf-8"))
    cfg = data.get("config", {})
    vort = ", ".join(f"({v['x']:g}, {v['y']:g}; n={v['n']})" for v in cfg.get("vortices", [])) or "none"
    print(f"csvortex {data.get('version', '?')} report: {args.path}")
    print(f"metric: {cfg.get('metric', {}).get('family', '?')}  vortices: {vort}  mu: {cfg.get('mu')}")
    grid = cfg.get("grid", {})
    print(f"grid: L = {grid.get('half_width')}  N = {grid.get('nodes')}")
    solve_part = data.get("solve", {})
    print(f"converged: {solve_part.get('converged')}  residual: {solve_part.get('residual')}")
    for key, value in sorted((data.get("observables") or {}).items()):
        print(f"  {key}: {value}")
    if data.get("oracle"):
        print(f"oracle: sup {data['oracle']['sup']}  l2 {data['oracle']['l2']}")
    for c in data.get("checks", []):
        value = "" if c.get("value") is None else c["value"]
        print(f"  [{c['status'].upper():4}] {c['name']} {value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csvortex",
        description="Self-dual Chern-Simons multi-vortex solver on conformally flat metrics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one configuration and write a JSON report")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--dump-fields", action="store_true", help="write u, w and the magnetic field as CSV")
    p.add_argument("--heatmap", action="store_true", help="write SVG heatmaps of w and the magnetic field")
    p.add_argument("--report", help="report path (overrides outputs.report)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="radial reference profile as r,u,w,Bfield CSV")
    p.add_argument("--n", type=int, default=1, help="vortex multiplicity at the origin")
    p.add_argument("--metric", default="flat", help="metric family (flat, gaussian_bump, power_growth, radial_table)")
    p.add_argument("--metric-params", help="JSON object of metric parameters")
    p.add_argument("--rmax", type=float, default=40.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--nodes", type=int, default=8192)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="run the invariant suite and print a pass/fail table")
    p.add_argument("--config", required=True)
    p.add_argument("--report", help="also write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="pretty-print an existing JSON report")
    p.add_argument("path")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, GridError, MetricError, RadialError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RadialConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
