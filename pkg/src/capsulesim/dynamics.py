"""Vibro-impact locomotion dynamics.

Two coupled bodies: the magnet slides on a 1-D track (the tilted drive axis,
fixed in the capsule frame) between two hard stops; the capsule body
translates on the plane.  Momentum flows between them three ways: the
magnetic drive force and its reaction, Coulomb friction in the bearing, and
Newtonian impacts at the stroke ends.  The ground resists the body with
stick-slip Coulomb friction under the full prototype weight.

Reduction used by the integrator (axis unit vector u, magnet mass m1, body
mass m2):

    m2 * dv_par/dt = -F_int + F_ext . u         (body along the axis)
    (m1 + m2) * dv_perp/dt = F_ext . u_perp     (magnet rides laterally)
    dv_s/dt = F_int / m1 - dv_par/dt            (relative slide)

where F_int is the axial magnetic force on the magnet plus bearing friction
and F_ext collects ground friction and (on tracks) wall contact.  When the
magnet is held by bearing stiction or rests against a stop that the drive
force keeps pressing, the internal forces cancel through the structure and
the pair moves as one rigid body.  Impacts exchange momentum impulsively:

    v_s+ = -e * v_s-,    dv_par = (1 + e) * m1 / (m1 + m2) * v_s-

which conserves linear momentum along the axis exactly for any restitution.

Integration is fixed-step semi-implicit Euler.  Steps are split at waveform
switch times so a step never straddles a current flip, and impact times are
localised by bisection inside a step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from .actuation import (
    DriveCommand,
    TiltGeometry,
    phase_patterns,
    tilt_axis,
    waveform_segment,
)
from .assembly import (
    AssemblyParams,
    AxialForceTable,
    CoilAssembly,
    build_axial_force_table,
)
from .constants import GRAVITY
from .magnetics import MagnetSpec

# Integrator limits.
DT_MAX: float = 2e-5           # >= 1600 steps per 30 Hz period
IMPACT_TIME_TOL: float = 1e-9  # bisection window for impact times, s
STICK_VELOCITY: float = 1e-5   # body speeds below this may latch into stick
REST_VELOCITY: float = 1e-4    # rebounds below this settle onto the stop
_TIME_EPS: float = 1e-12
_MAX_SUBSTEPS: int = 1000


class IntegrationDivergedError(RuntimeError):
    """State stopped being finite during integration."""


class SimulationValidationError(ValueError):
    """Inputs violate a precondition of the simulator."""


class ImpactSide(Enum):
    FRONT = "front"
    BACK = "back"


# ---------------------------------------------------------------------------
# Parameters and state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CapsuleParams:
    """Masses, friction, restitution, and stroke of the capsule.

    Defaults are the prototype values; body mass is the total weight minus
    the magnet (5.38 g - 0.92 g).  Ground friction and restitution are not
    reported for the prototype and carry calibrated defaults.
    """

    body_mass: float = 4.46e-3
    magnet: MagnetSpec = field(default_factory=MagnetSpec)
    stroke: float = 2.4e-3
    bearing_mu: float = 0.097
    ground_mu_static: float = 0.20
    ground_mu_kinetic: float = 0.15
    restitution: float = 0.4
    tilt: float = math.radians(22.0)

    def __post_init__(self) -> None:
        if not 0.0 <= self.restitution <= 1.0:
            raise SimulationValidationError(
                f"restitution must be in [0, 1], got {self.restitution}"
            )
        if not self.ground_mu_static >= self.ground_mu_kinetic >= 0.0:
            raise SimulationValidationError(
                "require ground_mu_static >= ground_mu_kinetic >= 0"
            )
        if self.stroke <= 0.0:
            raise SimulationValidationError("stroke must be positive")
        if self.body_mass <= 0.0:
            raise SimulationValidationError("body_mass must be positive")
        if self.bearing_mu < 0.0:
            raise SimulationValidationError("bearing_mu must be >= 0")

    @property
    def total_mass(self) -> float:
        return self.body_mass + self.magnet.mass

    @property
    def normal_load(self) -> float:
        """Ground normal force, N (full prototype weight)."""
        return self.total_mass * GRAVITY

    @property
    def half_stroke(self) -> float:
        return self.stroke / 2.0


@dataclass(frozen=True)
class MagnetState:
    """Magnet displacement and velocity relative to the body, along the axis."""

    s: float = 0.0
    v_s: float = 0.0


@dataclass(frozen=True)
class CapsuleState:
    """Planar pose and velocity of the body plus the internal magnet state."""

    t: float = 0.0
    position: NDArray[np.float64] = field(
        default_factory=lambda: np.zeros(2, dtype=np.float64)
    )
    velocity: NDArray[np.float64] = field(
        default_factory=lambda: np.zeros(2, dtype=np.float64)
    )
    heading: float = 0.0
    magnet: MagnetState = field(default_factory=MagnetState)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "position", np.asarray(self.position, dtype=np.float64).reshape(2)
        )
        object.__setattr__(
            self, "velocity", np.asarray(self.velocity, dtype=np.float64).reshape(2)
        )

    def require_finite(self) -> None:
        for name, value in (
            ("t", self.t),
            ("x", self.position[0]),
            ("y", self.position[1]),
            ("vx", self.velocity[0]),
            ("vy", self.velocity[1]),
            ("heading", self.heading),
            ("s", self.magnet.s),
            ("v_s", self.magnet.v_s),
        ):
            if not math.isfinite(value):
                raise IntegrationDivergedError(f"{name} is not finite: {value!r}")


@dataclass
class Trajectory:
    """Recorded time series of a run plus the drive line it was taken on."""

    t: NDArray[np.float64]
    x: NDArray[np.float64]
    y: NDArray[np.float64]
    s: NDArray[np.float64]
    v_s: NDArray[np.float64]
    vx: NDArray[np.float64]
    vy: NDArray[np.float64]
    heading: NDArray[np.float64]
    drive_axis: NDArray[np.float64]    # world unit 2-vector, forward positive
    capsule_axis: NDArray[np.float64]  # world unit 2-vector at start

    def __len__(self) -> int:
        return len(self.t)

    def to_csv(self, path) -> None:
        """Write the trajectory CSV: t,x,y,s,v_s,vx,vy (SI units)."""
        data = np.column_stack(
            [self.t, self.x, self.y, self.s, self.v_s, self.vx, self.vy]
        )
        np.savetxt(
            path, data, delimiter=",", header="t,x,y,s,v_s,vx,vy",
            comments="", fmt="%.10g",
        )


# ---------------------------------------------------------------------------
# Pure constitutive operations
# ---------------------------------------------------------------------------


def ground_friction(
    body_force: NDArray[np.floating],
    body_velocity: NDArray[np.floating],
    params: CapsuleParams,
    *,
    v_eps: float = STICK_VELOCITY,
) -> NDArray[np.float64]:
    """Coulomb ground friction on the capsule body.

    Sticking (speed below ``v_eps`` with the applied tangential force inside
    the static cone) returns the exact cancelling force; otherwise kinetic
    friction opposes the sliding direction, or the applied force when
    starting from rest outside the cone.

    Args:
        body_force: Applied tangential force on the body, N (2-vector).
        body_velocity: Body velocity, m/s (2-vector).
        params: Friction coefficients and normal load.

    Returns:
        Friction force, N (2-vector).
    """
    force = np.asarray(body_force, dtype=np.float64).reshape(2)
    vel = np.asarray(body_velocity, dtype=np.float64).reshape(2)
    load = params.normal_load
    speed = math.hypot(vel[0], vel[1])
    if speed < v_eps:
        magnitude = math.hypot(force[0], force[1])
        if magnitude <= params.ground_mu_static * load:
            return -force
        return -params.ground_mu_kinetic * load * force / magnitude
    return -params.ground_mu_kinetic * load * vel / speed


def _impact_exchange(
    v_rel: float, m1: float, m2: float, restitution: float
) -> tuple[float, float]:
    """Post-impact relative velocity and body velocity change along the axis."""
    v_rel_post = -restitution * v_rel
    dv_par = (1.0 + restitution) * m1 / (m1 + m2) * v_rel
    return v_rel_post, dv_par


def resolve_impact(
    state: CapsuleState,
    params: CapsuleParams,
    side: ImpactSide,
    *,
    axis: NDArray[np.floating] | None = None,
) -> CapsuleState:
    """Apply the impulsive impact law at a stroke constraint.

    Newtonian restitution on the relative velocity; the impulse updates the
    body velocity along the drive-axis projection so total momentum along
    the axis is conserved exactly.

    Args:
        state: State in contact (|s| at the half-stroke) with the relative
            velocity directed into the constraint.
        params: Masses and restitution.
        side: Which constraint is struck.
        axis: World-frame drive axis (2-vector).  Defaults to the
            right-tilted axis at the bearing limit.

    Returns:
        Post-impact state (s clamped onto the constraint).

    Raises:
        SimulationValidationError: Not in contact, or moving away.
    """
    half = params.half_stroke
    s, v_s = state.magnet.s, state.magnet.v_s
    if side is ImpactSide.FRONT:
        if not (abs(s - half) <= 1e-12 and v_s > 0.0):
            raise SimulationValidationError(
                "front impact requires s at +stroke/2 with inward velocity"
            )
        s_clamped = half
    else:
        if not (abs(s + half) <= 1e-12 and v_s < 0.0):
            raise SimulationValidationError(
                "back impact requires s at -stroke/2 with inward velocity"
            )
        s_clamped = -half

    if axis is None:
        angle = state.heading - params.tilt
        axis = np.array([math.cos(angle), math.sin(angle)])
    else:
        axis = np.asarray(axis, dtype=np.float64).reshape(2)

    v_s_post, dv_par = _impact_exchange(
        v_s, params.magnet.mass, params.body_mass, params.restitution
    )
    return replace(
        state,
        velocity=state.velocity + dv_par * axis,
        magnet=MagnetState(s=s_clamped, v_s=v_s_post),
    )


# ---------------------------------------------------------------------------
# Scalar integrator core
# ---------------------------------------------------------------------------


class _Core:
    """Mutable scalar state advanced by the fixed-step integrator.

    Everything in the hot path is a plain Python float; the axial force
    profile is a uniform-grid table queried with linear interpolation, so a
    step allocates nothing.
    """

    __slots__ = (
        "t", "x", "y", "vx", "vy", "heading", "s", "v_s",
        "m1", "m2", "mass_total", "half_stroke", "restitution",
        "bearing_force", "mu_s_load", "mu_k_load",
        "ux", "uy", "table1", "table2", "s_lo", "inv_ds", "n_table",
        "external_force",
    )

    def __init__(self, params: CapsuleParams) -> None:
        self.m1 = params.magnet.mass
        self.m2 = params.body_mass
        self.mass_total = params.total_mass
        self.half_stroke = params.half_stroke
        self.restitution = params.restitution
        self.bearing_force = params.bearing_mu * params.magnet.mass * GRAVITY
        self.mu_s_load = params.ground_mu_static * params.normal_load
        self.mu_k_load = params.ground_mu_kinetic * params.normal_load
        self.t = 0.0
        self.x = self.y = self.vx = self.vy = 0.0
        self.heading = 0.0
        self.s = self.v_s = 0.0
        self.ux, self.uy = 1.0, 0.0
        self.table1: list[float] = [0.0, 0.0]
        self.table2: list[float] = [0.0, 0.0]
        self.s_lo = -1.0
        self.inv_ds = 1.0
        self.n_table = 2
        # Optional world-frame force on the body (wall contact), set by track
        # runs: (x, y, vx, vy) -> (fx, fy).
        self.external_force: Callable[
            [float, float, float, float], tuple[float, float]
        ] | None = None

    # -- configuration ------------------------------------------------------

    def load_state(self, state: CapsuleState) -> None:
        self.t = float(state.t)
        self.x, self.y = float(state.position[0]), float(state.position[1])
        self.vx, self.vy = float(state.velocity[0]), float(state.velocity[1])
        self.heading = float(state.heading)
        self.s, self.v_s = float(state.magnet.s), float(state.magnet.v_s)

    def export_state(self) -> CapsuleState:
        return CapsuleState(
            t=self.t,
            position=np.array([self.x, self.y]),
            velocity=np.array([self.vx, self.vy]),
            heading=self.heading,
            magnet=MagnetState(s=self.s, v_s=self.v_s),
        )

    def set_axis_body(self, axis_x: float, axis_y: float) -> None:
        """Set the drive axis from its capsule-frame components."""
        c, si = math.cos(self.heading), math.sin(self.heading)
        self.ux = c * axis_x - si * axis_y
        self.uy = si * axis_x + c * axis_y

    def set_tables(
        self,
        table1: Sequence[float],
        table2: Sequence[float],
        s_grid: NDArray[np.float64],
    ) -> None:
        self.table1 = [float(v) for v in table1]
        self.table2 = [float(v) for v in table2]
        self.s_lo = float(s_grid[0])
        self.inv_ds = (len(s_grid) - 1) / float(s_grid[-1] - s_grid[0])
        self.n_table = len(s_grid)

    # -- diagnostics ---------------------------------------------------------

    def mechanical_energy(self) -> float:
        """Kinetic energy of both bodies, J (magnet velocity = body + slide)."""
        mvx = self.vx + self.v_s * self.ux
        mvy = self.vy + self.v_s * self.uy
        return 0.5 * self.m1 * (mvx * mvx + mvy * mvy) + 0.5 * self.m2 * (
            self.vx * self.vx + self.vy * self.vy
        )

    # -- integration ----------------------------------------------------------

    def step(self, h: float, phase: int) -> None:
        """Advance one fixed step of size ``h`` within a single waveform phase."""
        table = self.table1 if phase == 1 else self.table2
        remaining = h
        for _ in range(_MAX_SUBSTEPS):
            if remaining <= _TIME_EPS:
                return
            remaining -= self._substep(remaining, table)
        raise IntegrationDivergedError(
            f"substep limit exceeded at t={self.t!r} (impact chatter?)"
        )

    def _axial_force(self, table: list[float], s: float) -> float:
        pos = (s - self.s_lo) * self.inv_ds
        idx = int(pos)
        if idx < 0:
            idx = 0
        elif idx > self.n_table - 2:
            idx = self.n_table - 2
        lo = table[idx]
        return lo + (pos - idx) * (table[idx + 1] - lo)

    def _substep(self, h: float, table: list[float]) -> float:
        m1 = self.m1
        ux, uy = self.ux, self.uy
        half = self.half_stroke
        f_ax = self._axial_force(table, self.s)

        if self.external_force is not None:
            wfx, wfy = self.external_force(self.x, self.y, self.vx, self.vy)
        else:
            wfx = wfy = 0.0

        # Magnet locked to the body?  Bearing stiction mid-stroke, or resting
        # against a stop the axial force keeps pressing into.  The drive force
        # then closes through the structure: the pair moves as one rigid body.
        if self.v_s == 0.0 and (
            (self.s >= half and f_ax >= 0.0)
            or (self.s <= -half and f_ax <= 0.0)
            or abs(f_ax) <= self.bearing_force
        ):
            self._move_body(h, wfx, wfy, self.mass_total, self.mass_total)
            self.t += h
            return h

        # Free slip: kinetic bearing friction opposes the slide (or the
        # impending slide when starting from rest).
        ref = self.v_s if self.v_s != 0.0 else f_ax
        f_int = f_ax - math.copysign(self.bearing_force, ref)

        fx_app = -f_int * ux + wfx
        fy_app = -f_int * uy + wfy
        a_par = self._body_accel_par(fx_app, fy_app)
        rate = f_int / m1 - a_par
        v_s_end = self.v_s + rate * h
        s_end = self.s + v_s_end * h

        if -half <= s_end <= half:
            self._move_body(h, fx_app, fy_app, self.m2, self.mass_total)
            reversed_ = self.v_s != 0.0 and v_s_end * self.v_s < 0.0
            self.v_s = v_s_end
            self.s = s_end
            if reversed_ and abs(f_ax) <= self.bearing_force:
                self.v_s = 0.0  # friction dragged the slide through zero
            self.t += h
            return h

        # Impact: bisect the hit time, advance there, exchange momentum.
        target = half if s_end > half else -half
        h_hit = self._bisect_impact(target, rate, h)
        self._move_body(h_hit, fx_app, fy_app, self.m2, self.mass_total)
        self.v_s += rate * h_hit
        self.s = target
        self.t += h_hit
        v_post, dv_par = _impact_exchange(self.v_s, m1, self.m2, self.restitution)
        self.vx += dv_par * ux
        self.vy += dv_par * uy
        self.v_s = v_post
        pressing = f_ax >= 0.0 if target > 0.0 else f_ax <= 0.0
        if pressing and abs(self.v_s) < REST_VELOCITY:
            self.v_s = 0.0  # settle on the stop; next substep runs locked
        return h_hit

    def _bisect_impact(self, target: float, rate: float, h: float) -> float:
        """Bisect the hit time of s(h') = s + (v_s + rate*h')*h' on (0, h]."""
        s, v_s = self.s, self.v_s
        lo, hi = 0.0, h
        if target > 0.0:
            while hi - lo > IMPACT_TIME_TOL:
                mid = 0.5 * (lo + hi)
                if s + (v_s + rate * mid) * mid >= target:
                    hi = mid
                else:
                    lo = mid
        else:
            while hi - lo > IMPACT_TIME_TOL:
                mid = 0.5 * (lo + hi)
                if s + (v_s + rate * mid) * mid <= target:
                    hi = mid
                else:
                    lo = mid
        return hi

    def _friction(self, fx_app: float, fy_app: float) -> tuple[float, float, bool]:
        """Ground friction for the applied force; True when statically held."""
        vx, vy = self.vx, self.vy
        speed = math.hypot(vx, vy)
        if speed < STICK_VELOCITY:
            mag = math.hypot(fx_app, fy_app)
            if mag <= self.mu_s_load:
                return -fx_app, -fy_app, True
            scale = self.mu_k_load / mag
            return -fx_app * scale, -fy_app * scale, False
        scale = self.mu_k_load / speed
        return -vx * scale, -vy * scale, False

    def _body_accel_par(self, fx_app: float, fy_app: float) -> float:
        """Axis-parallel body acceleration for the given applied force."""
        ffx, ffy, held = self._friction(fx_app, fy_app)
        if held:
            return 0.0
        fx = fx_app + ffx
        fy = fy_app + ffy
        return (fx * self.ux + fy * self.uy) / self.m2

    def _move_body(
        self, h: float, fx_app: float, fy_app: float, mass_par: float, mass_perp: float
    ) -> None:
        """Semi-implicit body update under applied force plus ground friction.

        The axis-parallel inertia is the body alone while the magnet slides
        freely; perpendicular to the axis (and when locked) the magnet rides
        along, so the full mass moves.
        """
        ffx, ffy, held = self._friction(fx_app, fy_app)
        if held:
            # Static friction cancels the applied force; any sub-threshold
            # residual velocity is clamped so the body is exactly at rest.
            self.vx = self.vy = 0.0
            return
        fx = fx_app + ffx
        fy = fy_app + ffy
        ux, uy = self.ux, self.uy
        f_par = fx * ux + fy * uy
        f_perp = -fx * uy + fy * ux
        v_par = self.vx * ux + self.vy * uy
        v_perp = -self.vx * uy + self.vy * ux
        v_par += h * f_par / mass_par
        v_perp += h * f_perp / mass_perp
        vx_new = v_par * ux - v_perp * uy
        vy_new = v_par * uy + v_perp * ux
        if self.vx * vx_new + self.vy * vy_new < 0.0 and (
            vx_new * vx_new + vy_new * vy_new
        ) < (self.vx * self.vx + self.vy * self.vy):
            # Friction overshot through zero within the step: stop dead; the
            # next substep decides between stick and re-acceleration.
            vx_new = vy_new = 0.0
        self.vx, self.vy = vx_new, vy_new
        self.x += vx_new * h
        self.y += vy_new * h


# ---------------------------------------------------------------------------
# Model and runner
# ---------------------------------------------------------------------------


class CapsuleModel:
    """Capsule parameters, coil assembly, and cached axial force profiles.

    The model is immutable configuration; every run owns its own mutable
    state, so independent runs may execute concurrently.
    """

    def __init__(
        self,
        params: CapsuleParams | None = None,
        coils: AssemblyParams | None = None,
        *,
        dt: float = DT_MAX,
        output_rate: float = 1000.0,
        table_samples: int = 1025,
    ) -> None:
        self.params = params or CapsuleParams()
        if coils is None:
            coils = AssemblyParams(
                stroke=self.params.stroke,
                magnet_length=self.params.magnet.length,
                max_tilt=self.params.tilt,
            )
        if dt <= 0.0 or dt > DT_MAX:
            raise SimulationValidationError(
                f"dt must be in (0, {DT_MAX}], got {dt}"
            )
        self.coil_params = coils
        self.assembly = CoilAssembly(coils)
        self.dt = dt
        self.output_rate = output_rate
        self.table_samples = table_samples
        self.tilt_geometry = TiltGeometry(max_tilt=self.params.tilt)
        self._tables: dict[tuple[float, float], AxialForceTable] = {}

    # -- force profiles -------------------------------------------------------

    def axis_body(self, cmd: DriveCommand) -> NDArray[np.float64]:
        """Magnet track direction in the capsule frame for a command."""
        return tilt_axis(cmd, self.tilt_geometry)

    def force_table(self, cmd: DriveCommand) -> AxialForceTable:
        axis = self.axis_body(cmd)
        key = (round(float(axis[0]), 15), round(float(axis[1]), 15))
        table = self._tables.get(key)
        if table is None:
            table = build_axial_force_table(
                self.assembly,
                self.params.magnet,
                axis,
                s_max=self.params.half_stroke * 1.05,
                n_samples=self.table_samples,
            )
            self._tables[key] = table
        return table

    def phase_profiles(
        self, cmd: DriveCommand
    ) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        """Combined axial force profiles (phase 1, phase 2) and the s grid."""
        table = self.force_table(cmd)
        p1, p2 = phase_patterns(cmd)
        names = ("a1", "a2", "b1", "b2")
        prof1 = table.combine(dict(zip(names, p1.as_tuple())))
        prof2 = table.combine(dict(zip(names, p2.as_tuple())))
        return prof1, prof2, table.s_grid

    # -- runs -------------------------------------------------------------------

    def new_state(self) -> CapsuleState:
        return CapsuleState()

    def runner(
        self, cmd: DriveCommand, initial_state: CapsuleState | None = None
    ) -> "Runner":
        return Runner(self, cmd, initial_state or self.new_state())

    def step(
        self,
        state: CapsuleState,
        cmd: DriveCommand,
        dt: float,
        *,
        cmd_epoch: float = 0.0,
    ) -> CapsuleState:
        """Advance one fixed integration step.

        The waveform phase is evaluated at the step start (``state.t``
        relative to ``cmd_epoch``); ``simulate`` splits steps at switch times
        so a step never straddles a phase flip.

        Args:
            state: Current state (must be finite).
            cmd: Active drive command.
            dt: Step size, s; at most ``DT_MAX``.
            cmd_epoch: Sim time at which the command's waveform started.

        Returns:
            The advanced state.
        """
        if dt <= 0.0 or dt > DT_MAX + _TIME_EPS:
            raise SimulationValidationError(
                f"dt must be in (0, {DT_MAX}], got {dt}"
            )
        state.require_finite()
        runner = Runner(self, cmd, state, cmd_epoch=cmd_epoch)
        phase, _ = waveform_segment(cmd, max(state.t - cmd_epoch, 0.0))
        runner.core.step(dt, phase)
        return runner.state

    def simulate(
        self,
        cmd: DriveCommand,
        duration: float,
        *,
        initial_state: CapsuleState | None = None,
        output_rate: float | None = None,
    ) -> Trajectory:
        """Run a fixed-command simulation and record a trajectory.

        Deterministic: identical inputs give bit-identical trajectories.

        Args:
            cmd: Drive command (waveform phase starts at the initial time).
            duration: Simulated time span, s (> 0).
            initial_state: Starting state; defaults to rest at the origin.
            output_rate: Recording rate, Hz; defaults to the model's.

        Returns:
            Trajectory sampled at the output rate (first row is the initial
            state).
        """
        if duration <= 0.0:
            raise SimulationValidationError("duration must be > 0")
        runner = self.runner(cmd, initial_state)
        rate = output_rate if output_rate is not None else self.output_rate
        return runner.run(duration, output_rate=rate)


class Runner:
    """Owns the mutable state of one simulation run.

    Used directly by the interactive session engine; ``CapsuleModel.simulate``
    wraps it for batch runs.  Commands may be swapped at any step boundary;
    the waveform phase restarts at zero whenever that happens.
    """

    def __init__(
        self,
        model: CapsuleModel,
        cmd: DriveCommand,
        state: CapsuleState,
        *,
        cmd_epoch: float | None = None,
    ) -> None:
        self.model = model
        self.core = _Core(model.params)
        self.core.load_state(state)
        self.cmd = cmd
        self.cmd_epoch = self.core.t if cmd_epoch is None else cmd_epoch
        self._configure(cmd)

    def _configure(self, cmd: DriveCommand) -> None:
        prof1, prof2, s_grid = self.model.phase_profiles(cmd)
        axis = self.model.axis_body(cmd)
        self.axis_body = axis
        self.core.set_axis_body(float(axis[0]), float(axis[1]))
        self.core.set_tables(prof1, prof2, s_grid)

    @property
    def state(self) -> CapsuleState:
        return self.core.export_state()

    @property
    def t(self) -> float:
        return self.core.t

    def drive_axis_world(self) -> NDArray[np.float64]:
        return np.array([self.core.ux, self.core.uy])

    def set_command(self, cmd: DriveCommand) -> None:
        """Swap the drive command; takes effect now, waveform phase resets."""
        self.cmd = cmd
        self.cmd_epoch = self.core.t
        self._configure(cmd)

    def refresh_axis(self) -> None:
        """Recompute the world drive axis after a heading change."""
        self.core.set_axis_body(float(self.axis_body[0]), float(self.axis_body[1]))

    def advance_to(self, target: float) -> None:
        """Integrate up to sim time ``target``, splitting at waveform switches."""
        core = self.core
        if target <= core.t:
            return
        cmd = self.cmd
        dt = self.model.dt
        while core.t < target - _TIME_EPS:
            t_rel = max(core.t - self.cmd_epoch, 0.0)
            phase, switch_rel = waveform_segment(cmd, t_rel)
            seg_end = min(target, self.cmd_epoch + switch_rel)
            while core.t < seg_end - _TIME_EPS:
                core.step(min(dt, seg_end - core.t), phase)
            core.t = seg_end  # snap away accumulated rounding
        core.t = target

    def run(self, duration: float, *, output_rate: float) -> Trajectory:
        """Advance ``duration`` seconds recording rows at ``output_rate``."""
        core = self.core
        t0 = core.t
        out_dt = 1.0 / output_rate
        n_rows = int(duration / out_dt + _TIME_EPS)
        times = [t0 + k * out_dt for k in range(n_rows + 1)]
        if times[-1] < t0 + duration - _TIME_EPS:
            times.append(t0 + duration)

        rows = np.empty((len(times), 8))
        capsule_axis = np.array([math.cos(core.heading), math.sin(core.heading)])
        for i, target in enumerate(times):
            if target > t0:
                self.advance_to(target)
            rows[i] = (
                core.t, core.x, core.y, core.s, core.v_s,
                core.vx, core.vy, core.heading,
            )
            if not (math.isfinite(core.x) and math.isfinite(core.s)
                    and math.isfinite(core.vx)):
                self.state.require_finite()
        return Trajectory(
            t=rows[:, 0].copy(), x=rows[:, 1].copy(), y=rows[:, 2].copy(),
            s=rows[:, 3].copy(), v_s=rows[:, 4].copy(), vx=rows[:, 5].copy(),
            vy=rows[:, 6].copy(), heading=rows[:, 7].copy(),
            drive_axis=self.drive_axis_world(),
            capsule_axis=capsule_axis,
        )


def simulate(
    cmd: DriveCommand,
    duration: float,
    *,
    params: CapsuleParams | None = None,
    coils: AssemblyParams | None = None,
    model: CapsuleModel | None = None,
    initial_state: CapsuleState | None = None,
    output_rate: float | None = None,
) -> Trajectory:
    """Convenience wrapper: build a model (unless given) and simulate."""
    if model is None:
        model = CapsuleModel(params, coils)
    return model.simulate(
        cmd, duration, initial_state=initial_state, output_rate=output_rate
    )


# ---------------------------------------------------------------------------
# Trajectory reductions
# ---------------------------------------------------------------------------


def average_speed(traj: Trajectory) -> float:
    """Signed average speed along the drive line, m/s (positive = forward).

    Net displacement projected on the drive axis divided by elapsed time.

    Raises:
        SimulationValidationError: Trajectory spans less than 1 s.
    """
    elapsed = float(traj.t[-1] - traj.t[0])
    if elapsed < 1.0:
        raise SimulationValidationError(
            f"trajectory must span >= 1 s, got {elapsed:.3g} s"
        )
    dx = float(traj.x[-1] - traj.x[0])
    dy = float(traj.y[-1] - traj.y[0])
    return (dx * traj.drive_axis[0] + dy * traj.drive_axis[1]) / elapsed


def deviation_angle(traj: Trajectory, *, min_displacement: float = 1e-9) -> float | None:
    """Angle between the net displacement and the capsule axis, degrees.

    Returns None for a (numerically) stationary trajectory.
    """
    dx = float(traj.x[-1] - traj.x[0])
    dy = float(traj.y[-1] - traj.y[0])
    norm = math.hypot(dx, dy)
    if norm < min_displacement:
        return None
    cos_angle = (dx * traj.capsule_axis[0] + dy * traj.capsule_axis[1]) / norm
    return math.degrees(math.acos(max(-1.0, min(1.0, cos_angle))))
