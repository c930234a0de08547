"""Command-line entry point: simulate, force-table, calibrate, replay-fig6."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import calibration, harness
from .errors import CalibrationError, ConfigurationError, InsufficientDataError, ScenarioLoadError
from .force_model import Actuation, MaterialParams

EXIT_OK, EXIT_SCHEMA, EXIT_CALIBRATION = 0, 2, 3


def parse_diameters(text: str) -> list[float]:
    """``"5,10,15"`` or an inclusive range ``"5:40:5"``."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("range step must be > 0")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [float(v) for v in np.round(start + step * np.arange(count), 12)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def load_params(path) -> MaterialParams:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioLoadError(f"{path}: not valid JSON", [f"line {exc.lineno}: {exc.msg}"]) from exc
    try:
        return MaterialParams.from_dict(data.get("params", data))
    except (ConfigurationError, TypeError, ValueError, AttributeError) as exc:
        raise ScenarioLoadError(f"{path}: bad calibration file", [f"field params: {exc}"]) from exc


def _simulate(args) -> int:
    scenario = harness.load_scenario(args.scenario)
    scenario = harness.with_overrides(scenario, seed=args.seed, noise=None if args.noise is None else args.noise == "on")
    report = harness.run(scenario, args.out)
    print(json.dumps({"selected_mode": report.selected_mode.value, "lift_success": report.lift_success,
                      "report": str(report.report_path)}))
    return EXIT_OK


def _force_table(args) -> int:
    params = load_params(args.calibration) if args.calibration else MaterialParams()
    actuations = [Actuation(a) for a in args.actuations] if args.actuations else list(Actuation)
    rows = harness.force_table(args.diameters, params, actuations=actuations)
    harness.write_force_table(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _calibrate(args) -> int:
    measurements = calibration.read_measurements(args.measurements)
    try:
        params = calibration.calibrate(measurements, residual_cap=args.residual_cap)
    except CalibrationError as exc:
        print(exc.report(), file=sys.stderr)
        return EXIT_CALIBRATION
    except InsufficientDataError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    rows = calibration.residuals(measurements, params)
    rms = math.sqrt(sum(r[3] ** 2 for r in rows) / len(rows))
    payload = {
        "params": params.to_dict(),
        "rms_residual_N": rms,
        "residuals": [{"label": r[0], "measured_N": r[1], "predicted_N": r[2], "residual_N": r[3]} for r in rows],
    }
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    print(json.dumps(params.to_dict()))
    return EXIT_OK


def _replay(args) -> int:
    for path in harness.replay_reference_traces(args.out):
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eg-gripper", description="EG soft gripper co-simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one closed-loop scenario")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sim.add_argument("--noise", choices=("on", "off"), default=None, help="override sensor noise")
    sim.set_defaults(func=_simulate)

    table = sub.add_parser("force-table", help="grasp force per diameter and actuation")
    table.add_argument("--diameters", type=parse_diameters, default=parse_diameters("5:40:5"))
    table.add_argument("--calibration", default=None, help="JSON written by `calibrate`")
    table.add_argument("--actuations", nargs="+", choices=[a.value for a in Actuation], default=None)
    table.add_argument("--out", required=True)
    table.set_defaults(func=_force_table)

    cal = sub.add_parser("calibrate", help="fit mu, sigma0 and P_c to measured forces")
    cal.add_argument("--measurements", required=True)
    cal.add_argument("--out", required=True)
    cal.add_argument("--residual-cap", type=float, default=0.5, help="largest accepted RMS residual (N)")
    cal.set_defaults(func=_calibrate)

    fig = sub.add_parser("replay-fig6", help="noise-free engagement pressure and detector voltage traces")
    fig.add_argument("--out", required=True)
    fig.set_defaults(func=_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
