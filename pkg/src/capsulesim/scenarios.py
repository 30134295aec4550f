"""Batch experiments: frequency/duty sweeps and the semicircular track run.

Sweeps grid over (method, frequency, duty), simulate each cell, and reduce
to signed average speeds and deviation angles.  Repeats are only meaningful
with noise injection (friction jitter); the simulator itself is
deterministic, so repeated runs of an unjittered cell agree bit-exactly.

The track scenario adds penalty wall contact to the planar dynamics and
drives the capsule through a U-shaped channel: an entry straight, a
semicircular arc, and an exit straight.  The channel is narrow, so the
capsule heading is kinematically aligned with the local centerline tangent
(no yaw dynamics); steering inside the channel comes from the drive tilt
plus wall reactions.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .actuation import DriveCommand, DriveMethod
from .config import SimConfig, default_config
from .dynamics import (
    CapsuleModel,
    SimulationValidationError,
    Trajectory,
    average_speed,
    deviation_angle,
)

SWEEP_CSV_HEADER = "method,freq_hz,duty,mean_speed_mms,std_mms,deviation_deg"


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPlan:
    """Grid of drive settings to evaluate.

    Attributes:
        methods: Drive methods to run.
        frequencies: Square-wave frequencies, Hz.
        duties: Duty-cycle fractions.
        repeats: Runs per cell (identical unless ``noise_level`` > 0).
        duration: Simulated seconds per run (>= 2).
        noise_level: Relative jitter applied to the ground friction pair per
            repeat (e.g. 0.05 for +/-5 %); 0 disables noise.
        seed: Seed for the jitter generator.
    """

    methods: tuple[DriveMethod, ...] = (DriveMethod.ONE_COIL, DriveMethod.FOUR_COIL)
    frequencies: tuple[float, ...] = (10.0, 20.0, 30.0)
    duties: tuple[float, ...] = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
    repeats: int = 1
    duration: float = 5.0
    noise_level: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.methods and self.frequencies and self.duties):
            raise SimulationValidationError("sweep plan lists must be non-empty")
        if self.duration < 2.0:
            raise SimulationValidationError(
                f"duration must be >= 2 s, got {self.duration}"
            )
        if self.repeats < 1:
            raise SimulationValidationError("repeats must be >= 1")

    def cells(self) -> list[tuple[DriveMethod, float, float]]:
        return [
            (m, f, d)
            for m in self.methods
            for f in self.frequencies
            for d in self.duties
        ]


@dataclass(frozen=True)
class SweepCell:
    """Aggregated result of one grid cell."""

    method: DriveMethod
    frequency: float
    duty: float
    mean_speed: float | None       # m/s, signed; None when the cell failed
    std_speed: float | None        # m/s over repeats
    deviation_deg: float | None    # None when stationary or failed
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class SweepResult:
    """All cells of a sweep, in plan order."""

    plan: SweepPlan
    cells: list[SweepCell]

    def cell(self, method: DriveMethod, frequency: float, duty: float) -> SweepCell:
        for c in self.cells:
            if c.method is method and c.frequency == frequency and c.duty == duty:
                return c
        raise KeyError((method, frequency, duty))

    def best_cell(self, method: DriveMethod | None = None) -> SweepCell:
        """Cell with the highest signed mean speed (optionally one method)."""
        candidates = [
            c
            for c in self.cells
            if not c.failed and (method is None or c.method is method)
        ]
        if not candidates:
            raise SimulationValidationError("sweep has no successful cells")
        return max(candidates, key=lambda c: c.mean_speed)

    def to_csv(self, path: str | Path) -> None:
        """Write the results grid (speeds in mm/s; failed cells have empty values)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_CSV_HEADER.split(","))
            for c in self.cells:
                writer.writerow(
                    [
                        c.method.value,
                        f"{c.frequency:g}",
                        f"{c.duty:g}",
                        "" if c.mean_speed is None else f"{c.mean_speed * 1e3:.6g}",
                        "" if c.std_speed is None else f"{c.std_speed * 1e3:.6g}",
                        "" if c.deviation_deg is None else f"{c.deviation_deg:.6g}",
                    ]
                )

    def summary(self) -> dict:
        """Machine-readable summary (JSON-compatible)."""
        best = {}
        for method in self.plan.methods:
            try:
                cell = self.best_cell(method)
                best[method.value] = {
                    "freq_hz": cell.frequency,
                    "duty": cell.duty,
                    "mean_speed_mms": cell.mean_speed * 1e3,
                }
            except SimulationValidationError:
                best[method.value] = None
        return {
            "cells_total": len(self.cells),
            "cells_failed": sum(c.failed for c in self.cells),
            "failed": [
                {
                    "method": c.method.value,
                    "freq_hz": c.frequency,
                    "duty": c.duty,
                    "error": c.error,
                }
                for c in self.cells
                if c.failed
            ],
            "best": best,
        }

    def save_summary(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


def _run_cell(
    config: SimConfig,
    plan: SweepPlan,
    method: DriveMethod,
    frequency: float,
    duty: float,
) -> SweepCell:
    """Simulate one cell (all repeats) and aggregate."""
    cmd = replace(
        config.drive, method=method, frequency=frequency, duty=duty
    )
    speeds: list[float] = []
    angles: list[float] = []
    try:
        for rep in range(plan.repeats):
            params = config.capsule
            if plan.noise_level > 0.0:
                # Per-repeat friction jitter; seeded per cell for determinism.
                rng = np.random.default_rng(
                    [plan.seed, rep, int(frequency * 1e3), int(duty * 1e3),
                     0 if method is DriveMethod.ONE_COIL else 1]
                )
                factor = 1.0 + plan.noise_level * rng.uniform(-1.0, 1.0)
                params = replace(
                    params,
                    ground_mu_static=params.ground_mu_static * factor,
                    ground_mu_kinetic=params.ground_mu_kinetic * factor,
                )
            model = CapsuleModel(
                params, config.coils,
                dt=config.sim.dt,
                output_rate=config.sim.output_rate,
                table_samples=config.sim.force_table_samples,
            )
            traj = model.simulate(cmd, plan.duration)
            speeds.append(average_speed(traj))
            angle = deviation_angle(traj)
            if angle is not None:
                angles.append(angle)
    except Exception as exc:  # failed cells are recorded, the sweep continues
        return SweepCell(
            method=method, frequency=frequency, duty=duty,
            mean_speed=None, std_speed=None, deviation_deg=None,
            error=f"{type(exc).__name__}: {exc}",
        )
    return SweepCell(
        method=method,
        frequency=frequency,
        duty=duty,
        mean_speed=float(np.mean(speeds)),
        std_speed=float(np.std(speeds)),
        deviation_deg=float(np.mean(angles)) if angles else None,
    )


def run_sweep(
    plan: SweepPlan,
    config: SimConfig | None = None,
    *,
    jobs: int = 1,
    out_dir: str | Path | None = None,
) -> SweepResult:
    """Run every cell of the plan and aggregate speeds and angles.

    Cells are independent; with ``jobs`` > 1 they run in worker processes
    and are merged in plan order, so the result does not depend on
    scheduling.  A diverged cell is recorded as failed and the sweep
    continues.

    Args:
        plan: The grid to run.
        config: Base configuration (calibrated defaults when omitted).
        jobs: Worker processes (1 = run inline).
        out_dir: When given, write ``results.csv`` and ``summary.json`` there.

    Returns:
        SweepResult with one cell per grid point, in plan order.
    """
    config = config or default_config()
    cells = plan.cells()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    _run_cell,
                    [config] * len(cells),
                    [plan] * len(cells),
                    *zip(*cells),
                )
            )
    else:
        results = [_run_cell(config, plan, m, f, d) for (m, f, d) in cells]
    result = SweepResult(plan=plan, cells=results)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.to_csv(out / "results.csv")
        result.save_summary(out / "summary.json")
    return result


# ---------------------------------------------------------------------------
# Semicircular track
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrackSpec:
    """U-shaped channel: entry straight, semicircular arc, exit straight.

    The arc turns left through 180 degrees.  Both straights have equal
    length, chosen so the centerline totals ``total_length``.

    Attributes:
        total_length: Centerline length, m.
        arc_diameter: Diameter of the semicircular arc centerline, m.
        width: Channel inner width, m (must exceed the capsule diameter).
        capsule_radius: Radius of the capsule footprint, m.
        wall_stiffness: Penalty spring stiffness, N/m.
        wall_damping: Penalty damper, N*s/m; None selects critical damping
            against the full capsule mass.
        penetration_bound: Report-level bound on wall penetration, m.
    """

    total_length: float = 250e-3
    arc_diameter: float = 100e-3
    width: float = 25e-3
    capsule_radius: float = 7.5e-3
    wall_stiffness: float = 5000.0
    wall_damping: float | None = None
    penetration_bound: float = 0.5e-3

    def __post_init__(self) -> None:
        if self.width <= 2.0 * self.capsule_radius:
            raise SimulationValidationError(
                "channel width must exceed the capsule diameter"
            )
        if self.arc_length > self.total_length:
            raise SimulationValidationError(
                "arc longer than the whole track; increase total_length"
            )

    @property
    def arc_radius(self) -> float:
        return self.arc_diameter / 2.0

    @property
    def arc_length(self) -> float:
        return math.pi * self.arc_radius

    @property
    def straight_length(self) -> float:
        return (self.total_length - self.arc_length) / 2.0

    @property
    def free_half_width(self) -> float:
        """Lateral clearance of the capsule centre inside the channel."""
        return self.width / 2.0 - self.capsule_radius


class _TrackGeometry:
    """Scalar centerline projection (hot path: called every substep)."""

    def __init__(self, spec: TrackSpec) -> None:
        self.l1 = spec.straight_length
        self.r = spec.arc_radius
        self.arc_len = spec.arc_length
        self.total = spec.total_length
        # Arc centre; entry straight runs along +x from the origin.
        self.cx = self.l1
        self.cy = self.r

    def project(self, x: float, y: float) -> tuple[float, float, float, float]:
        """Nearest centerline point: (arclength, lateral offset, tx, ty).

        Lateral offset is positive to the left of the tangent.
        """
        best: tuple[float, float, float, float] | None = None
        best_dist = math.inf

        # Entry straight: y = 0, x in [0, l1], tangent +x.
        u = min(max(x, 0.0), self.l1)
        dist = math.hypot(x - u, y)
        if dist < best_dist:
            best_dist = dist
            best = (u, y, 1.0, 0.0)

        # Arc: centre (cx, cy), from angle -pi/2 (start) ccw to +pi/2.
        dx, dy = x - self.cx, y - self.cy
        rho = math.hypot(dx, dy)
        if rho > 0.0:
            phi = math.atan2(dx, -dy)  # 0 at arc start, pi at arc end
            if 0.0 <= phi <= math.pi:
                dist = abs(rho - self.r)
                if dist < best_dist:
                    best_dist = dist
                    # Tangent ccw; lateral positive to the left = inward.
                    tx, ty = math.cos(phi), math.sin(phi)
                    lat = self.r - rho  # left of tangent is toward the centre
                    best = (self.l1 + phi * self.r, lat, tx, ty)

        # Exit straight: y = 2r, x from l1 back to l1 - l2, tangent -x.
        u = min(max(self.l1 - x, 0.0), self.l1)
        dist = math.hypot(x - (self.l1 - u), y - 2.0 * self.r)
        if dist < best_dist:
            best_dist = dist
            best = (self.l1 + self.arc_len + u, 2.0 * self.r - y, -1.0, 0.0)

        assert best is not None
        return best


@dataclass
class TrackResult:
    """Outcome of a channel passage attempt."""

    trajectory: Trajectory
    passage_time: float | None     # s; None when stalled
    mean_speed: float | None       # m/s along the centerline; None when stalled
    stalled: bool
    progress: float                # centerline arclength reached, m
    max_penetration: float         # worst wall penetration, m

    @property
    def passed(self) -> bool:
        return self.passage_time is not None


def run_track(
    track: TrackSpec,
    schedule: Sequence[tuple[float, DriveCommand]] | DriveCommand,
    config: SimConfig | None = None,
    *,
    max_duration: float = 120.0,
    stall_timeout: float = 10.0,
    stall_progress: float = 1e-3,
) -> TrackResult:
    """Drive the capsule through the channel and report the passage.

    The command schedule is a list of (start time, command) pairs (or a
    single command); each command's waveform phase restarts when it takes
    effect.  The run ends when the capsule centre passes the end of the
    centerline, or stalls (< ``stall_progress`` of advance within
    ``stall_timeout``), or ``max_duration`` elapses (also reported as a
    stall).

    Args:
        track: Channel geometry and contact parameters.
        schedule: Drive command(s) over time.
        config: Base configuration (calibrated defaults when omitted).
        max_duration: Hard cap on simulated time, s.
        stall_timeout: Window with no progress that counts as a stall, s.
        stall_progress: Minimum advance per window, m.

    Returns:
        TrackResult; a stall is a reported outcome, not an exception.
    """
    config = config or default_config()
    if isinstance(schedule, DriveCommand):
        schedule = [(0.0, schedule)]
    schedule = sorted(schedule, key=lambda item: item[0])
    if not schedule or schedule[0][0] > 0.0:
        raise SimulationValidationError("schedule must start at t = 0")

    geometry = _TrackGeometry(track)
    model = config.build_model()
    runner = model.runner(schedule[0][1])
    mass = config.capsule.total_mass
    stiffness = track.wall_stiffness
    damping = (
        track.wall_damping
        if track.wall_damping is not None
        else 2.0 * math.sqrt(stiffness * mass)
    )
    free_half = track.free_half_width
    max_pen = 0.0

    def wall_force(x: float, y: float, vx: float, vy: float) -> tuple[float, float]:
        nonlocal max_pen
        _, lat, tx, ty = geometry.project(x, y)
        pen = abs(lat) - free_half
        if pen <= 0.0:
            return 0.0, 0.0
        if pen > max_pen:
            max_pen = pen
        # Outward normal (away from the centerline) on the capsule's side.
        side = 1.0 if lat > 0.0 else -1.0
        nx, ny = -ty * side, tx * side
        rate = vx * nx + vy * ny  # penetration rate
        magnitude = stiffness * pen + damping * rate
        if magnitude <= 0.0:
            return 0.0, 0.0  # unilateral contact: the wall never pulls
        return -magnitude * nx, -magnitude * ny

    runner.core.external_force = wall_force

    tick_dt = 1.0 / config.sim.output_rate
    n_ticks = int(max_duration / tick_dt)
    core = runner.core
    rows = [(core.t, core.x, core.y, core.s, core.v_s, core.vx, core.vy, core.heading)]
    next_cmd = 1
    passage_time: float | None = None
    progress = 0.0
    stall_anchor = (0.0, 0.0)  # (t, progress)

    for k in range(1, n_ticks + 1):
        target = k * tick_dt
        while next_cmd < len(schedule) and schedule[next_cmd][0] <= runner.t:
            runner.set_command(schedule[next_cmd][1])
            next_cmd += 1
        runner.advance_to(target)
        core = runner.core
        u, _, tx, ty = geometry.project(core.x, core.y)
        heading = math.atan2(ty, tx)
        if heading != core.heading:
            core.heading = heading
            runner.refresh_axis()
        progress = max(progress, u)
        rows.append(
            (core.t, core.x, core.y, core.s, core.v_s, core.vx, core.vy, core.heading)
        )
        if u >= track.total_length:
            passage_time = core.t
            break
        if core.t - stall_anchor[0] >= stall_timeout:
            if progress - stall_anchor[1] < stall_progress:
                break  # stalled
            stall_anchor = (core.t, progress)

    data = np.asarray(rows)
    traj = Trajectory(
        t=data[:, 0], x=data[:, 1], y=data[:, 2], s=data[:, 3], v_s=data[:, 4],
        vx=data[:, 5], vy=data[:, 6], heading=data[:, 7],
        drive_axis=runner.drive_axis_world(),
        capsule_axis=np.array([1.0, 0.0]),
    )
    return TrackResult(
        trajectory=traj,
        passage_time=passage_time,
        mean_speed=None if passage_time is None else track.total_length / passage_time,
        stalled=passage_time is None,
        progress=progress,
        max_penetration=max_pen,
    )
