"""Placement of the four drive coils and axial force profiles.

The capsule frame has +x along the capsule axis, z up; the two coil pairs
sit on the two bearing-limited tilt axes in the horizontal plane.  A1/B1 are
the front coils (+axis side), A2/B2 the back coils, every coil normal points
forward along its axis, so positive current attracts the magnet and negative
current repels it.

The magnet slides on a 1-D track through this geometry.  Because the field
is linear in each coil current, the axial drive force decomposes into
per-coil unit-current profiles f_c(s); the dynamics combines them with the
instantaneous currents instead of re-evaluating Biot-Savart integrals every
step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .actuation import DEFAULT_MAX_TILT_DEG
from .geometry import Pose, rotation_from_z_to
from .magnetics import (
    Coil,
    CoilSpec,
    MagnetSpec,
    field_at,
    field_gradient,
    field_of_coils,
    wrench_on_dipole,
)

COIL_NAMES = ("a1", "a2", "b1", "b2")


@dataclass(frozen=True)
class AssemblyParams:
    """Geometry of the coil assembly.

    Attributes:
        semi_major: Coil ellipse semi-major axis, m.
        semi_minor: Coil ellipse semi-minor axis, m.
        turns: Turns per coil.
        current_amplitude: Rated coil current, A.
        n_segments: Polygonisation count per coil.
        stroke: Total free travel of the magnet, m.
        magnet_length: Magnet length, m (sets the coil standoff).
        clearance: Gap between magnet face at full stroke and coil centre
            plane, m (defaults to the coil thickness).
        max_tilt: Bearing-limited tilt of the drive axes, rad.
    """

    semi_major: float = 4.5e-3
    semi_minor: float = 3.0e-3
    turns: int = 50
    current_amplitude: float = 0.5
    n_segments: int = 256
    stroke: float = 2.4e-3
    magnet_length: float = 10e-3
    clearance: float = 1.3e-3
    max_tilt: float = math.radians(DEFAULT_MAX_TILT_DEG)

    @property
    def coil_offset(self) -> float:
        """Distance from capsule centre to each coil centre along its axis."""
        return self.stroke / 2.0 + self.magnet_length / 2.0 + self.clearance


def drive_axis(max_tilt: float, right: bool) -> NDArray[np.float64]:
    """Unit vector of one tilted drive axis (capsule frame).

    Right tilts toward -y, left toward +y; both lie in the horizontal plane.
    """
    lateral = -math.sin(max_tilt) if right else math.sin(max_tilt)
    return np.array([math.cos(max_tilt), lateral, 0.0])


class CoilAssembly:
    """The four posed drive coils of one capsule."""

    def __init__(self, params: AssemblyParams | None = None) -> None:
        self.params = params or AssemblyParams()
        p = self.params
        axis_a = drive_axis(p.max_tilt, right=True)
        axis_b = drive_axis(p.max_tilt, right=False)
        d = p.coil_offset

        def spec(center: NDArray[np.float64], normal: NDArray[np.float64]) -> CoilSpec:
            return CoilSpec(
                semi_major=p.semi_major,
                semi_minor=p.semi_minor,
                turns=p.turns,
                current_amplitude=p.current_amplitude,
                pose=Pose(position=center, rotation=rotation_from_z_to(normal)),
                n_segments=p.n_segments,
            )

        self.coils: dict[str, Coil] = {
            "a1": Coil(spec(d * axis_a, axis_a)),
            "a2": Coil(spec(-d * axis_a, axis_a)),
            "b1": Coil(spec(d * axis_b, axis_b)),
            "b2": Coil(spec(-d * axis_b, axis_b)),
        }
        self.axis_a = axis_a
        self.axis_b = axis_b

    def energized(self, currents: dict[str, float] | None = None) -> list[Coil]:
        """The coil set with the given per-name currents (default: rated)."""
        currents = currents or {}
        return [
            coil.with_current(currents.get(name, coil.spec.current_amplitude))
            for name, coil in self.coils.items()
        ]

    def field(self, currents: dict[str, float], point: NDArray[np.floating]):
        return field_of_coils(self.energized(currents), point)

    def gradient(self, currents: dict[str, float], point: NDArray[np.floating]):
        return field_gradient(self.energized(currents), point)

    def wrench(
        self,
        currents: dict[str, float],
        magnet: MagnetSpec,
        position: NDArray[np.floating],
        moment_dir: NDArray[np.floating],
    ):
        return wrench_on_dipole(
            self.energized(currents), magnet, position, moment_dir
        )


@dataclass(frozen=True)
class AxialForceTable:
    """Per-coil unit-current axial force profiles along one magnet track.

    ``profiles[name][i]`` is the force (N) along ``axis`` on the magnet at
    ``s_grid[i]`` when coil ``name`` carries 1 A, the magnet moment pointing
    along ``axis``.  Combined with instantaneous currents by linearity.
    """

    axis: NDArray[np.float64]
    s_grid: NDArray[np.float64]
    profiles: dict[str, NDArray[np.float64]]

    def combine(self, currents: dict[str, float]) -> NDArray[np.float64]:
        """Total axial force profile for one set of coil currents."""
        total = np.zeros_like(self.s_grid)
        for name, current in currents.items():
            if current != 0.0:
                total += current * self.profiles[name]
        return total


def build_axial_force_table(
    assembly: CoilAssembly,
    magnet: MagnetSpec,
    axis: NDArray[np.floating],
    *,
    s_max: float,
    n_samples: int = 1025,
) -> AxialForceTable:
    """Tabulate per-coil unit-current axial forces along the magnet track.

    With the moment along the track direction u, the axial dipole force
    reduces to the directional derivative ``|m| * d(B.u)/ds`` (the field is
    curl-free away from the windings), so one field evaluation per grid
    point suffices; the derivative is taken on the grid itself.

    Args:
        assembly: Coil assembly.
        magnet: Magnet constants (moment magnitude).
        axis: Magnet track direction, capsule frame (normalised internally).
        s_max: Half-range of magnet centre travel to cover, m.
        n_samples: Grid size (uniform).

    Returns:
        AxialForceTable on ``linspace(-s_max, s_max, n_samples)``.
    """
    u = np.asarray(axis, dtype=np.float64).reshape(3)
    u = u / np.linalg.norm(u)
    s_grid = np.linspace(-s_max, s_max, n_samples)
    positions = s_grid[:, None] * u  # (P, 3)

    profiles: dict[str, NDArray[np.float64]] = {}
    for name, coil in assembly.coils.items():
        # Unit current; the clearance check is skipped because the coil
        # standoff keeps the track several mm from any winding.
        fields = field_at(
            coil.polyline, 1.0, coil.spec.turns, positions, check_clearance=False
        )
        profiles[name] = magnet.moment_magnitude * np.gradient(
            fields @ u, s_grid
        )
    return AxialForceTable(axis=u, s_grid=s_grid, profiles=profiles)
