"""Command-line entry point.

Every subcommand accepts ``--seed``, ``--out`` and ``--format``. Reports go to
stdout in the chosen format; with ``--out`` they are also written to that
directory together with any plot data. The exit status is 0 when every
requested trial ran to completion (whatever its outcome), 2 for bad
configuration or input, and 1 for other runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .errors import SoftpressError
from .estimator import NoiseConfig
from .frameio import Manifest
from .metrics import evaluate_sequence
from .pressure import DEFAULT_CONTACT_THRESHOLD

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class ConfigInputError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="master seed (default: scenario seed)")
    p.add_argument("--out", type=Path, default=None, help="directory for reports and plot data")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return p


def _estimator_args(p):
    p.add_argument("--scenario", type=Path, default=None, help="scenario JSON file")
    p.add_argument("--estimator", choices=("oracle", "noisy"), default="oracle")
    p.add_argument("--noise", type=Path, default=None, help="noise configuration JSON")
    p.add_argument("--trials", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="softpress",
                                     description="Planar pressure sensing, control and trials.")
    groups = parser.add_subparsers(dest="group", required=True)

    sim = groups.add_parser("sim", help="simulation").add_subparsers(dest="cmd", required=True)
    p = sim.add_parser("run", parents=[common], help="record one contact sequence")
    p.add_argument("scenario", type=Path)
    p.add_argument("--target", type=float, default=None, help="force target in N")
    p.set_defaults(func=cmd_sim_run)

    met = groups.add_parser("metrics", help="pressure metrics").add_subparsers(dest="cmd",
                                                                               required=True)
    p = met.add_parser("eval", parents=[common], help="score estimates against ground truth")
    p.add_argument("--gt", type=Path, required=True, help="ground-truth manifest")
    p.add_argument("--est", type=Path, required=True, help="estimate manifest")
    p.add_argument("--threshold", type=float, default=DEFAULT_CONTACT_THRESHOLD)
    p.set_defaults(func=cmd_metrics_eval)

    servo = groups.add_parser("servo", help="controller trials").add_subparsers(dest="cmd",
                                                                                required=True)
    p = servo.add_parser("force", parents=[common], help="force regulation trials")
    p.add_argument("--target", type=float, required=True, help="force target in N")
    _estimator_args(p)
    p.set_defaults(func=cmd_servo_force)
    p = servo.add_parser("path", parents=[common], help="square path tracking")
    p.add_argument("--mode", choices=("open", "closed"), required=True)
    _estimator_args(p)
    p.set_defaults(func=cmd_servo_path, trials=1)

    grasp = groups.add_parser("grasp", help="grasp trials").add_subparsers(dest="cmd",
                                                                           required=True)
    p = grasp.add_parser("suite", parents=[common], help="grasp each listed object")
    p.add_argument("--objects", type=Path, required=True,
                   help='JSON list of {"name", "dims": [L, W, H] mm}')
    _estimator_args(p)
    p.set_defaults(func=cmd_grasp_suite)
    return parser


def _read_json(path: Path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigInputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInputError(f"{path} is not valid JSON: {exc}") from exc


def _scenario(args) -> harness.Scenario:
    path = getattr(args, "scenario", None)
    scenario = harness.Scenario() if path is None else _load_scenario(path)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    return scenario


def _load_scenario(path) -> harness.Scenario:
    try:
        return harness.Scenario.from_dict(_read_json(path))
    except (TypeError, KeyError) as exc:
        raise ConfigInputError(f"bad scenario {path}: {exc}") from exc


def _estimator(args) -> harness.EstimatorConfig:
    noise = NoiseConfig()
    if args.noise is not None:
        try:
            noise = NoiseConfig.from_dict(_read_json(args.noise))
        except TypeError as exc:
            raise ConfigInputError(f"bad noise config {args.noise}: {exc}") from exc
    return harness.EstimatorConfig(args.estimator, noise)


def _emit(args, reports, extra: dict | None = None, meta: dict | None = None):
    text = (harness.reports_to_json(reports, meta) if args.format == "json"
            else harness.reports_to_csv(reports))
    sys.stdout.write(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"reports.{args.format}").write_text(text)
        for name, body in (extra or {}).items():
            (args.out / name).write_text(body)


def cmd_sim_run(args) -> int:
    scenario = _load_scenario(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    out = args.out or Path("sim_out")
    report = harness.record_contact_sequence(scenario, out, args.target)
    args.out = out
    _emit(args, [report])
    return EXIT_OK


def cmd_metrics_eval(args) -> int:
    try:
        gt, est = Manifest.load(args.gt), Manifest.load(args.est)
    except OSError as exc:
        raise ConfigInputError(f"cannot read manifest: {exc}") from exc
    report = evaluate_sequence(gt.frames(), est.frames(), args.threshold)
    text = report.to_json() if args.format == "json" else report.to_csv()
    sys.stdout.write(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"metrics.{args.format}").write_text(text)
    return EXIT_OK


def _meta(scenario, estimator) -> dict:
    return {"scenario": scenario.to_dict(), "estimator": estimator.to_dict()}


def cmd_servo_force(args) -> int:
    scenario, estimator = _scenario(args), _estimator(args)
    reports = harness.run_force_trials(scenario, (args.target,), args.trials, estimator,
                                       tag=f"force/{estimator.kind}")
    _emit(args, reports, {"force_plot.csv": harness.force_plot_csv(reports)},
          _meta(scenario, estimator))
    return EXIT_OK


def cmd_servo_path(args) -> int:
    scenario, estimator = _scenario(args), _estimator(args)
    reports, traces = [], {}
    for i in range(args.trials):
        seed = harness.trial_seed(scenario.seed, "path", i)
        log = []
        reports.append(harness.run_square_path(scenario, args.mode, estimator, seed, i,
                                               path_log=log))
        traces[f"{args.mode}/{i}"] = log
    corners = harness.square_corners(harness.path_start(scenario), scenario.path_side)
    _emit(args, reports, {"path_plot.csv": harness.path_plot_csv(corners, traces)},
          _meta(scenario, estimator))
    return EXIT_OK


def cmd_grasp_suite(args) -> int:
    scenario, estimator = _scenario(args), _estimator(args)
    data = _read_json(args.objects)
    entries = data["objects"] if isinstance(data, dict) else data
    try:
        objects = harness.parse_objects(entries)
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigInputError(f"bad objects file {args.objects}: {exc}") from exc
    logs = {}
    reports = harness.run_grasp_suite(scenario, objects, args.trials, estimator, logs=logs)
    summary = {k: {"success": v[0], "trials": v[1]}
               for k, v in harness.success_counts(reports).items()}
    _emit(args, reports, {"grasp_summary.json": json.dumps(summary, indent=2, sort_keys=True)
                          + "\n", "control_log.csv": harness.control_log_csv(logs)},
          _meta(scenario, estimator))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "trials", 1) < 1:
        parser.error("--trials must be at least 1")
    try:
        return args.func(args)
    except (ConfigInputError, SoftpressError, ValueError) as exc:
        # configuration problems, including library validation errors
        print(f"softpress: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        print(f"softpress: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
