"""Drive-signal generation for the one-coil and four-coil methods.

Currents are ideal square waves (zero rise time): the H-bridge and diode
behaviour of the real control circuits is reduced to which coil conducts in
which phase and with which polarity.  Sign convention: positive current
produces a field along the coil's own axis, which attracts the magnet; a
negative current repels it.

Phase 1 occupies the first ``duty`` fraction of each period.  For the
forward-right orientation it energises the back coil of the drive pair (the
attract-backward stroke); phase 2 energises the front coil.  Backward
commands swap which coil leads, forward-left/backward-right commands swap
the roles of the A and B pairs (mirror symmetry).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from numpy.typing import NDArray

DEFAULT_MAX_TILT_DEG: float = 22.0


class DriveMethod(Enum):
    ONE_COIL = "one_coil"
    FOUR_COIL = "four_coil"


class DriveDirection(Enum):
    FORWARD_RIGHT = "FR"
    BACKWARD_LEFT = "BL"
    FORWARD_LEFT = "FL"
    BACKWARD_RIGHT = "BR"

    @property
    def is_right(self) -> bool:
        """True when the drive axis tilts to the capsule's right (-y)."""
        return self in (DriveDirection.FORWARD_RIGHT, DriveDirection.BACKWARD_LEFT)

    @property
    def is_forward(self) -> bool:
        return self in (DriveDirection.FORWARD_RIGHT, DriveDirection.FORWARD_LEFT)


@dataclass(frozen=True)
class DriveCommand:
    """One steady drive setting: method, waveform, and steering direction.

    Attributes:
        method: One-coil or four-coil excitation.
        frequency: Square-wave frequency, Hz.
        duty: Fraction of the period occupied by phase 1, in (0, 1).
        current_amplitude: Drive current amplitude, A.
        direction: Steering direction (selects drive pair and phase lead).
        repel_level: Four-coil repelling-pair strength as a fraction of the
            drive amplitude; 0 silences the repelling pair.
    """

    method: DriveMethod = DriveMethod.FOUR_COIL
    frequency: float = 30.0
    duty: float = 0.6
    current_amplitude: float = 0.5
    direction: DriveDirection = DriveDirection.FORWARD_RIGHT
    repel_level: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.duty < 1.0:
            raise ValueError(f"duty must be in (0, 1), got {self.duty}")
        if self.frequency <= 0.0:
            raise ValueError(f"frequency must be > 0, got {self.frequency}")
        if self.current_amplitude < 0.0:
            raise ValueError("current_amplitude must be >= 0")
        if not 0.0 <= self.repel_level <= 1.0:
            raise ValueError(f"repel_level must be in [0, 1], got {self.repel_level}")

    @property
    def period(self) -> float:
        return 1.0 / self.frequency


@dataclass(frozen=True)
class CoilCurrents:
    """Signed currents of the four coils, A."""

    i_a1: float = 0.0
    i_a2: float = 0.0
    i_b1: float = 0.0
    i_b2: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.i_a1, self.i_a2, self.i_b1, self.i_b2)


def phase_patterns(cmd: DriveCommand) -> tuple[CoilCurrents, CoilCurrents]:
    """The two per-phase current patterns of a command.

    Coil order is (A1, A2, B1, B2) with A1/B1 the front coils.  Layout:

    * one-coil, forward-right: phase 1 attracts with the front coil A1
      (the drive circuit's positive excitation), phase 2 with A2; the other
      pair stays off (diode gating).
    * four-coil, forward-right: phase 1 repels with A1 and attracts with A2
      (the H-bridge drives the pair in antiphase, A1 = -A2) while the
      repelling pair carries a constant current ``-repel_level * I`` in both
      phases.
    * backward commands swap which coil leads; left commands swap the roles
      of the A and B pairs.

    Returns:
        (phase-1 currents, phase-2 currents).
    """
    amp = cmd.current_amplitude
    if cmd.method is DriveMethod.ONE_COIL:
        front, back = amp, 0.0  # phase 1 attracts toward the front stop
        if not cmd.direction.is_forward:
            front, back = back, front
        drive = ((front, back), (back, front))  # ((a1, a2) phase1, phase2)
        idle = ((0.0, 0.0), (0.0, 0.0))
    else:
        rep = -cmd.repel_level * amp
        lead = -amp if cmd.direction.is_forward else amp
        drive = ((lead, -lead), (-lead, lead))
        idle = ((rep, rep), (rep, rep))

    if cmd.direction.is_right:
        a, b = drive, idle
    else:
        a, b = idle, drive
    return (
        CoilCurrents(a[0][0], a[0][1], b[0][0], b[0][1]),
        CoilCurrents(a[1][0], a[1][1], b[1][0], b[1][1]),
    )


def phase_at(cmd: DriveCommand, t: float) -> int:
    """Active phase (1 or 2) at time ``t`` since command start."""
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    phi = math.fmod(t * cmd.frequency, 1.0)
    return 1 if phi < cmd.duty else 2


def currents_at(cmd: DriveCommand, t: float) -> CoilCurrents:
    """Coil currents at time ``t`` seconds after the command started."""
    p1, p2 = phase_patterns(cmd)
    return p1 if phase_at(cmd, t) == 1 else p2


def waveform_segment(cmd: DriveCommand, t: float) -> tuple[int, float]:
    """Phase at ``t`` and the time of the next current switch.

    Boundary-robust companion of ``phase_at``/``next_switch_time`` for
    integrators that land exactly on switch times: a ``t`` within rounding
    noise of a boundary is classified as the segment the boundary opens, and
    the returned switch time is always strictly greater than ``t``.

    Args:
        cmd: Drive command.
        t: Seconds since the command started (>= 0).

    Returns:
        (phase, next switch time), both in command-local time.
    """
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    tf = t * cmd.frequency
    n = math.floor(tf)
    phi = tf - n
    # fmod rounding grows with t; the guard stays far below one sample.
    eps = max(1e-12, tf * 1e-14)
    if phi >= 1.0 - eps:
        n += 1
        phi = 0.0
    if phi < cmd.duty - eps:
        return 1, (n + cmd.duty) / cmd.frequency
    return 2, (n + 1.0) / cmd.frequency


def next_switch_time(cmd: DriveCommand, t: float) -> float:
    """Earliest time strictly after ``t`` at which any coil current changes."""
    return waveform_segment(cmd, t)[1]


@dataclass(frozen=True)
class TiltGeometry:
    """Bearing tilt limit and the repel-level-to-tilt map.

    The self-aligning bearing allows the magnet axis to deviate from the
    capsule axis by at most ``max_tilt``; for the four-coil method the
    actual tilt scales with the repel level through ``monotone`` (linear by
    default, replaceable with a measured curve).
    """

    max_tilt: float = math.radians(DEFAULT_MAX_TILT_DEG)
    monotone: Callable[[float], float] = lambda level: level


def tilt_axis(cmd: DriveCommand, geometry: TiltGeometry | None = None) -> NDArray[np.float64]:
    """Unit vector of the magnet's vibration axis in the capsule frame.

    One-coil drive always tilts fully to the energised pair's side; the
    four-coil tilt follows ``max_tilt * monotone(repel_level)``.  The capsule
    axis is +x; right corresponds to -y (z up).

    Args:
        cmd: Drive command.
        geometry: Tilt limit and repel map; defaults to the 22 deg bearing.

    Returns:
        Unit 3-vector.
    """
    geo = geometry or TiltGeometry()
    if cmd.method is DriveMethod.ONE_COIL:
        tilt = geo.max_tilt
    else:
        tilt = geo.max_tilt * geo.monotone(cmd.repel_level)
    lateral = -math.sin(tilt) if cmd.direction.is_right else math.sin(tilt)
    return np.array([math.cos(tilt), lateral, 0.0])
