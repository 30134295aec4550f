"""Command-line interface.

Subcommands:
    field     sample B, force, and torque on a grid -> CSV
    waveform  dump the per-coil drive currents -> CSV
    run       batch simulation -> trajectory CSV
    sweep     frequency x duty grid -> results CSV + JSON summary
    track     semicircular-channel passage -> report + trajectory CSV
    serve     websocket service hosting a live session (plus the console)
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .actuation import DriveMethod, currents_at
from .config import (
    ConfigError,
    SimConfig,
    default_config,
    drive_command_from_dict,
    load_config,
)
from .dynamics import average_speed, deviation_angle
from .magnetics import wrench_on_dipole
from .scenarios import SweepPlan, TrackSpec, run_sweep, run_track

FIELD_CSV_HEADER = "x,y,z,Bx,By,Bz,Fx,Fy,Fz,Tx,Ty,Tz"


def _axis_values(spec: str, name: str) -> np.ndarray:
    """Parse a grid axis 'min:max:count' or a single number."""
    parts = spec.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) == 3:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ValueError
            return np.linspace(lo, hi, count)
    except ValueError:
        pass
    raise SystemExit(f"error: --{name} expects 'value' or 'min:max:count', got {spec!r}")


def _load_cli_config(path: str | None) -> SimConfig:
    if path is None:
        return default_config()
    try:
        return load_config(path)
    except ConfigError as exc:
        raise SystemExit(f"error: invalid config {path}: {exc}")
    except OSError as exc:
        raise SystemExit(f"error: cannot read config: {exc}")


def _cmd_field(args: argparse.Namespace) -> None:
    config = _load_cli_config(args.config)
    assembly = config.build_model().assembly
    currents = dict(zip(("a1", "a2", "b1", "b2"), args.currents))
    coils = assembly.energized(currents)
    magnet = config.capsule.magnet
    moment_dir = np.array(args.moment)
    if not np.linalg.norm(moment_dir) > 0:
        raise SystemExit("error: --moment must be a nonzero vector")

    xs = _axis_values(args.x, "x")
    ys = _axis_values(args.y, "y")
    zs = _axis_values(args.z, "z")
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        writer = csv.writer(out)
        writer.writerow(FIELD_CSV_HEADER.split(","))
        from .magnetics import field_of_coils

        for x in xs:
            for y in ys:
                for z in zs:
                    point = np.array([x, y, z])
                    b = field_of_coils(coils, point)
                    wrench = wrench_on_dipole(coils, magnet, point, moment_dir)
                    writer.writerow(
                        [f"{v:.10g}" for v in (x, y, z, *b, *wrench.force, *wrench.torque)]
                    )
    finally:
        if out is not sys.stdout:
            out.close()


def _cmd_waveform(args: argparse.Namespace) -> None:
    config = _load_cli_config(args.config)
    cmd = drive_command_from_dict(
        {
            "method": args.method,
            "frequency_hz": args.freq,
            "duty": args.duty,
            "direction": args.direction,
            "current_a": args.amplitude,
            "repel_level": args.repel,
        },
        base=config.drive,
    )
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        writer = csv.writer(out)
        writer.writerow(["t", "i_a1", "i_a2", "i_b1", "i_b2"])
        for k in range(args.samples):
            t = k / args.rate if args.rate else k * cmd.period / max(args.samples - 1, 1)
            c = currents_at(cmd, t)
            writer.writerow([f"{t:.10g}"] + [f"{v:.10g}" for v in c.as_tuple()])
    finally:
        if out is not sys.stdout:
            out.close()


def _cmd_run(args: argparse.Namespace) -> None:
    config = _load_cli_config(args.config)
    model = config.build_model()
    traj = model.simulate(config.drive, args.duration)
    traj.to_csv(args.out)
    speed = average_speed(traj) if traj.t[-1] - traj.t[0] >= 1.0 else None
    report = {
        "duration_s": args.duration,
        "rows": len(traj),
        "mean_speed_mms": None if speed is None else speed * 1e3,
        "deviation_deg": deviation_angle(traj),
        "out": str(args.out),
    }
    print(json.dumps(report, indent=2))


def _cmd_sweep(args: argparse.Namespace) -> None:
    config = _load_cli_config(args.config)
    if args.plan:
        import yaml

        with open(args.plan, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        try:
            methods = tuple(
                DriveMethod(m) for m in raw.get("methods", ["one_coil", "four_coil"])
            )
            plan = SweepPlan(
                methods=methods,
                frequencies=tuple(raw.get("frequencies_hz", (10.0, 20.0, 30.0))),
                duties=tuple(raw.get("duties", (0.3, 0.4, 0.5, 0.6, 0.7, 0.8))),
                repeats=int(raw.get("repeats", 1)),
                duration=float(raw.get("duration_s", 5.0)),
                noise_level=float(raw.get("noise_level", 0.0)),
                seed=int(raw.get("seed", 0)),
            )
        except (ValueError, TypeError) as exc:
            raise SystemExit(f"error: invalid sweep plan: {exc}")
    else:
        plan = SweepPlan(duration=args.duration)
    result = run_sweep(plan, config, jobs=args.jobs, out_dir=args.out)
    summary = result.summary()
    print(json.dumps(summary, indent=2))
    if summary["cells_failed"]:
        sys.exit(1)


def _cmd_track(args: argparse.Namespace) -> None:
    config = _load_cli_config(args.config)
    track = TrackSpec(
        wall_stiffness=args.stiffness if args.stiffness else 5000.0,
    )
    result = run_track(
        track, config.drive, config, max_duration=args.max_duration
    )
    if args.out:
        result.trajectory.to_csv(args.out)
    print(
        json.dumps(
            {
                "passed": result.passed,
                "stalled": result.stalled,
                "passage_time_s": result.passage_time,
                "mean_speed_mms": None
                if result.mean_speed is None
                else result.mean_speed * 1e3,
                "progress_mm": result.progress * 1e3,
                "max_penetration_mm": result.max_penetration * 1e3,
            },
            indent=2,
        )
    )
    if result.stalled:
        sys.exit(1)


def _cmd_serve(args: argparse.Namespace) -> None:
    import uvicorn

    from .service import SessionManager, create_app

    config = _load_cli_config(args.config)
    manager = SessionManager(idle_timeout=args.idle_timeout)
    static_dir = args.static
    if static_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static_dir = str(bundled) if bundled.is_dir() else None
    app = create_app(manager, default_config=config, static_dir=static_dir)
    session = manager.create(config)
    print(f"session {session.id} ready; ws://{args.host}:{args.port}/ws/{session.id}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capsulesim",
        description="Vibro-impact capsule robot simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("field", help="sample field/force/torque on a grid")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--x", default="0", help="grid axis: value or min:max:count (m)")
    p.add_argument("--y", default="0", help="grid axis (m)")
    p.add_argument("--z", default="0", help="grid axis (m)")
    p.add_argument(
        "--currents",
        type=float,
        nargs=4,
        metavar=("A1", "A2", "B1", "B2"),
        default=[0.5, 0.5, 0.5, 0.5],
        help="coil currents in amperes",
    )
    p.add_argument(
        "--moment",
        type=float,
        nargs=3,
        metavar=("MX", "MY", "MZ"),
        default=[1.0, 0.0, 0.0],
        help="magnet moment direction",
    )
    p.add_argument("--out", default="-", help="output CSV path (default stdout)")
    p.set_defaults(func=_cmd_field)

    p = sub.add_parser("waveform", help="dump drive-current waveforms")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--method", default="four_coil", choices=["one_coil", "four_coil"])
    p.add_argument("--freq", type=float, default=30.0, help="frequency, Hz")
    p.add_argument("--duty", type=float, default=0.6)
    p.add_argument("--direction", default="FR", choices=["FR", "BL", "FL", "BR"])
    p.add_argument("--amplitude", type=float, default=0.5, help="current, A")
    p.add_argument("--repel", type=float, default=1.0, help="repel level, 0..1")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument(
        "--rate",
        type=float,
        default=None,
        help="sample rate, Hz (default: spread samples over one period)",
    )
    p.add_argument("--out", default="-", help="output CSV path (default stdout)")
    p.set_defaults(func=_cmd_waveform)

    p = sub.add_parser("run", help="batch simulation to a trajectory CSV")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--duration", type=float, default=5.0, help="simulated seconds")
    p.add_argument("--out", required=True, help="trajectory CSV path")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="frequency x duty sweep")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--plan", help="YAML sweep plan")
    p.add_argument("--duration", type=float, default=5.0, help="seconds per cell")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("track", help="semicircular channel passage")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--stiffness", type=float, default=None, help="wall stiffness, N/m")
    p.add_argument("--max-duration", type=float, default=120.0)
    p.add_argument("--out", help="trajectory CSV path")
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("serve", help="run the websocket service")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--static", help="console asset directory (default: frontend/dist)")
    p.add_argument("--idle-timeout", type=float, default=300.0)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> None:
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
