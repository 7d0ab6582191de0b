"""Command-line front end.

Subcommands: ``simulate`` (scenario -> events + ground truth),
``estimate`` (events -> velocity CSV), ``evaluate`` (estimates vs ground
truth -> metric report), ``plot`` (overlay + residual SVGs),
``blur-budget`` (exposure ceilings CSV/SVG), ``flow-debug`` (one frame
pair's flow as CSV + quiver SVG).

Exit codes: 0 success, 2 configuration error, 3 input format error,
4 evaluation error.  The environment variable EVFLOW_SEED overrides the
configured seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import event_io, state_io
from .config import RunConfig, Scenario
from .errors import ConfigError, EvaluationError, InputFormatError
from .evaluate import evaluate
from .events import accumulate, to_intensity
from .flow import compute_flow
from .pipeline import run_pipeline
from .plots import dump_flow_csv, emit_plots, flow_quiver_svg, write_blur_budget
from .synth import generate_events
from .events import CameraModel

SEED_ENV = "EVFLOW_SEED"


def _load_run_config(path: str) -> RunConfig:
    cfg = RunConfig.from_file(path)
    seed_env = os.environ.get(SEED_ENV)
    if seed_env is not None:
        try:
            cfg = replace(cfg, seed=int(seed_env))
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {seed_env!r}") from exc
    return cfg


def _load_events(path: str, cfg: RunConfig) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise InputFormatError(f"events file not found: {p}")
    if p.suffix == ".evt":
        events, width, height = event_io.load_events_binary(p)
        if (width, height) != (cfg.camera.width, cfg.camera.height):
            raise InputFormatError(
                f"event file is {width}x{height} but the config camera is "
                f"{cfg.camera.width}x{cfg.camera.height}")
        return events
    return event_io.load_events_csv(p, cfg.camera.width, cfg.camera.height)


def _cmd_simulate(args) -> int:
    scenario = Scenario.from_file(args.scenario)
    sim = scenario.sim
    seed_env = os.environ.get(SEED_ENV)
    if seed_env is not None:
        sim = replace(sim, seed=int(seed_env))
    events, truth, _ = generate_events(sim, scenario.trajectory)
    out_events = Path(args.events)
    out_events.parent.mkdir(parents=True, exist_ok=True)
    if out_events.suffix == ".evt":
        event_io.write_events_binary(out_events, events, sim.cam.width, sim.cam.height)
    else:
        event_io.write_events_csv(out_events, events)
    if args.ground_truth:
        Path(args.ground_truth).parent.mkdir(parents=True, exist_ok=True)
        state_io.write_velocity_csv(args.ground_truth, truth)
    if args.imu:
        from .vehicle import ImuSeries
        t = np.array([g.t_mid for g in truth])
        omega = np.array([g.omega for g in truth])
        Path(args.imu).parent.mkdir(parents=True, exist_ok=True)
        state_io.write_imu_csv(args.imu, ImuSeries((t * 1e6).round().astype(np.int64), omega))
    print(f"simulated {events.size} events over {sim.duration} s "
          f"({sim.cam.width}x{sim.cam.height})")
    return 0


def _cmd_estimate(args) -> int:
    cfg = _load_run_config(args.config)
    events = _load_events(args.events or cfg.events_path, cfg)
    imu = None
    if cfg.omega_source == "imu":
        imu = state_io.load_imu_csv(cfg.imu_path)
    result = run_pipeline(events, cfg, imu=imu)
    out_dir = Path(args.out_dir or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    est_path = out_dir / "estimates.csv"
    state_io.write_velocity_csv(est_path, result.estimates)
    stats = result.timings.stats_ms()
    with open(out_dir / "timings.json", "w") as f:
        json.dump({"stages_ms": stats,
                   "overhead_ms": result.timings.overhead_ms(),
                   "accumulate_s": result.timings.accumulate_s,
                   "frames_in": result.frames_in,
                   "frames_valid": result.frames_valid,
                   "frames_invalid": result.frames_invalid,
                   "invalid_reasons": result.invalid_reasons}, f, indent=2)
    print(f"wrote {est_path} ({result.frames_in} frames: {result.frames_valid} valid, "
          f"{result.frames_invalid} invalid)")
    for stage, st in stats.items():
        print(f"  {stage:10s} mean {st['mean']:8.2f} ms  p95 {st['p95']:8.2f} ms")
    print(f"  overhead   mean {result.timings.overhead_ms():8.2f} ms")
    return 0


def _cmd_evaluate(args) -> int:
    estimates = state_io.load_velocity_csv(args.estimates)
    truth = state_io.load_velocity_csv(args.ground_truth)
    latency = {}
    timings_path = Path(args.estimates).parent / "timings.json"
    if timings_path.exists():
        latency = json.loads(timings_path.read_text()).get("stages_ms", {})
    report = evaluate(estimates, truth, tolerance_s=args.tolerance, latency_ms=latency)
    for line in report.lines():
        print(line)
    if args.report:
        Path(args.report).write_text("\n".join(report.lines()) + "\n")
    return 0


def _cmd_plot(args) -> int:
    estimates = state_io.load_velocity_csv(args.estimates)
    truth = state_io.load_velocity_csv(args.ground_truth)
    written = emit_plots(estimates, truth, args.out_dir)
    print("\n".join(str(p) for p in written))
    return 0


def _cmd_blur_budget(args) -> int:
    cam = CameraModel(width=args.sensor_width, height=args.sensor_height,
                      height_z=args.height_z,
                      fov_alpha=np.radians(args.fov_deg))
    speeds = [float(s) for s in args.speeds.split(",")]
    budgets = [float(b) for b in args.budgets.split(",")]
    csv_path, svg_path = write_blur_budget(speeds, budgets, cam, args.out_dir)
    print(f"{csv_path}\n{svg_path}")
    return 0


def _cmd_flow_debug(args) -> int:
    cfg = _load_run_config(args.config)
    events = _load_events(args.events or cfg.events_path, cfg)
    frames = accumulate(events, cfg.accumulation)
    k = args.pair_index
    if not 1 <= k < len(frames):
        raise ConfigError(f"pair index {k} out of range 1..{len(frames) - 1}")
    prev_img = to_intensity(frames[k - 1], cfg.accumulation.count_cap, cfg.merge)
    curr_img = to_intensity(frames[k], cfg.accumulation.count_cap, cfg.merge)
    field = compute_flow(prev_img, curr_img, cfg.flow, cfg.window_s)
    out_dir = Path(args.out_dir or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"flow_{k:05d}.csv"
    svg_path = out_dir / f"flow_{k:05d}.svg"
    dump_flow_csv(field, cfg.stride, csv_path)
    svg_path.write_text(flow_quiver_svg(field, cfg.stride, title=f"flow, pair {k}"))
    print(f"{csv_path}\n{svg_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evflow",
        description="Planar velocity estimation from event-camera optical flow")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write events + ground truth")
    p.add_argument("scenario", help="scenario config file")
    p.add_argument("--events", required=True, help="output events path (.csv or .evt)")
    p.add_argument("--ground-truth", default="", help="output ground-truth velocity CSV")
    p.add_argument("--imu", default="", help="output IMU CSV derived from the trajectory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="estimate velocities from an event stream")
    p.add_argument("--config", required=True, help="run config file")
    p.add_argument("--events", default="", help="override io.events from the config")
    p.add_argument("--out-dir", default="", help="override io.out_dir from the config")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("evaluate", help="compare estimates against ground truth")
    p.add_argument("--estimates", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--tolerance", type=float, required=True,
                   help="pairing tolerance in seconds (half the window is typical)")
    p.add_argument("--report", default="", help="also write the report to this file")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("plot", help="velocity overlays and residual histograms")
    p.add_argument("--estimates", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("blur-budget", help="exposure ceilings per speed and blur budget")
    p.add_argument("--speeds", default="5,10,15,20,25,30,35,40",
                   help="comma-separated speeds in m/s")
    p.add_argument("--budgets", default="0.01,0.02,0.05", help="blur fractions")
    p.add_argument("--height-z", type=float, default=0.6)
    p.add_argument("--fov-deg", type=float, default=60.0)
    p.add_argument("--sensor-width", type=int, default=640)
    p.add_argument("--sensor-height", type=int, default=480)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_blur_budget)

    p = sub.add_parser("flow-debug", help="dump one frame pair's flow (CSV + quiver SVG)")
    p.add_argument("--config", required=True)
    p.add_argument("--events", default="")
    p.add_argument("--pair-index", type=int, default=1)
    p.add_argument("--out-dir", default="")
    p.set_defaults(func=_cmd_flow_debug)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InputFormatError as exc:
        print(f"input format error: {exc}", file=sys.stderr)
        return 3
    except EvaluationError as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
