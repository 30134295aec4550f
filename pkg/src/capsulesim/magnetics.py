"""Coil magnetostatics: fields, gradients, and dipole wrenches.

The drive coils are elliptic loops discretised into straight segments; each
segment contributes its exact closed-form Biot-Savart field, so the only
discretisation error is the polygonal approximation of the ellipse itself.
Force and torque on the internal permanent magnet are evaluated in the point
dipole approximation with moment ``m = volume * magnetisation``.

All quantities are SI: metres, amperes, tesla, newtons.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .constants import MU_0
from .geometry import Pose

# Minimum allowed distance between a field point and any wire segment.  The
# magnet can never physically approach the winding closer than the coil
# thickness (1.3 mm), so 0.1 mm leaves a wide safety margin.
CLEARANCE: float = 1e-4

# Central-difference step for field gradients.  Small enough that the
# truncation error stays below the 1e-6 relative tolerance demanded of the
# div/curl identities at mm scales, large enough to stay clear of the
# floating-point rounding floor.
GRADIENT_STEP: float = 1e-6

DEFAULT_N_SEGMENTS: int = 256


class SingularityError(ValueError):
    """Raised when a field point lies within ``CLEARANCE`` of a wire segment."""


# ---------------------------------------------------------------------------
# Specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoilSpec:
    """Geometry and winding of one elliptic drive coil.

    Attributes:
        semi_major: Ellipse semi-major axis, m.
        semi_minor: Ellipse semi-minor axis, m.
        turns: Number of wire turns.
        current_amplitude: Rated drive current, A.
        pose: Placement of the coil in the capsule frame.  The loop lies in
            the local xy-plane; positive current circulates counterclockwise
            about the local +z axis, so the field at the centre points along
            ``pose.axis``.
        n_segments: Number of straight segments in the polygonal loop.
    """

    semi_major: float
    semi_minor: float
    turns: int = 50
    current_amplitude: float = 0.5
    pose: Pose = field(default_factory=Pose)
    n_segments: int = DEFAULT_N_SEGMENTS

    def __post_init__(self) -> None:
        if not (self.semi_major >= self.semi_minor > 0.0):
            raise ValueError(
                f"require semi_major >= semi_minor > 0, got "
                f"({self.semi_major}, {self.semi_minor})"
            )
        if self.turns < 1:
            raise ValueError(f"turns must be >= 1, got {self.turns}")
        if self.n_segments < 8:
            raise ValueError(f"n_segments must be >= 8, got {self.n_segments}")
        if self.current_amplitude < 0.0:
            raise ValueError("current_amplitude must be >= 0")


@dataclass(frozen=True)
class MagnetSpec:
    """Physical constants of the cylindrical permanent magnet.

    Defaults are the prototype values: 4 mm diameter, 10 mm length, 0.92 g,
    NdFeB magnetisation 8.38e5 A/m.
    """

    diameter: float = 4e-3
    length: float = 10e-3
    mass: float = 0.92e-3
    magnetization: float = 8.38e5

    def __post_init__(self) -> None:
        for name in ("diameter", "length", "mass", "magnetization"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def volume(self) -> float:
        """Cylinder volume, m^3."""
        return np.pi * (self.diameter / 2.0) ** 2 * self.length

    @property
    def moment_magnitude(self) -> float:
        """Dipole moment magnitude ``volume * magnetisation``, A*m^2."""
        return self.volume * self.magnetization


@dataclass(frozen=True)
class FieldSample:
    """Field and gradient evaluated at one point."""

    position: NDArray[np.float64]
    b: NDArray[np.float64]
    grad_b: NDArray[np.float64]


@dataclass(frozen=True)
class Wrench:
    """Force and torque on the dipole magnet."""

    force: NDArray[np.float64]
    torque: NDArray[np.float64]


# ---------------------------------------------------------------------------
# Coil discretisation
# ---------------------------------------------------------------------------


def ellipse_polyline(
    semi_major: float,
    semi_minor: float,
    n_segments: int,
    pose: Pose | None = None,
) -> NDArray[np.float64]:
    """Closed polyline with vertices on an ellipse at uniform angles.

    Geometric primitive without the physical-coil segment minimum (an
    n_segments of 4 inscribes a square, for instance).

    Args:
        semi_major: Semi-axis along local x, m.
        semi_minor: Semi-axis along local y, m.
        n_segments: Number of straight segments (>= 3).
        pose: Optional placement; identity keeps the loop in the xy-plane.

    Returns:
        Array of shape (n_segments + 1, 3); last vertex repeats the first.
    """
    if n_segments < 3:
        raise ValueError(f"n_segments must be >= 3, got {n_segments}")
    if not (semi_major >= semi_minor > 0.0):
        raise ValueError(
            f"require semi_major >= semi_minor > 0, got ({semi_major}, {semi_minor})"
        )
    theta = np.linspace(0.0, 2.0 * np.pi, n_segments + 1)
    local = np.zeros((n_segments + 1, 3))
    local[:, 0] = semi_major * np.cos(theta)
    local[:, 1] = semi_minor * np.sin(theta)
    local[-1] = local[0]  # close exactly, no trig residue
    return local if pose is None else pose.transform(local)


def discretize_ellipse(spec: CoilSpec) -> NDArray[np.float64]:
    """Polygonise the coil's ellipse into a closed polyline.

    Vertices lie exactly on the posed ellipse at uniform parameter angles;
    the last vertex repeats the first so the loop is closed.

    Args:
        spec: Coil to discretise.

    Returns:
        Array of shape (n_segments + 1, 3) in the capsule frame.
    """
    return ellipse_polyline(
        spec.semi_major, spec.semi_minor, spec.n_segments, spec.pose
    )


def ellipse_perimeter(spec: CoilSpec) -> float:
    """Total length of the discretised loop, m."""
    poly = discretize_ellipse(spec)
    return float(np.sum(np.linalg.norm(np.diff(poly, axis=0), axis=1)))


# ---------------------------------------------------------------------------
# Biot-Savart
# ---------------------------------------------------------------------------


def _segment_clearance(polyline: NDArray[np.float64], points: NDArray[np.float64]) -> float:
    """Smallest distance from any point to any segment of the polyline."""
    a = polyline[:-1]  # (S, 3)
    d = polyline[1:] - a  # segment direction vectors
    len_sq = np.einsum("ij,ij->i", d, d)
    len_sq = np.where(len_sq == 0.0, 1.0, len_sq)
    rel = points[..., None, :] - a  # (..., S, 3)
    t = np.clip(np.einsum("...sj,sj->...s", rel, d) / len_sq, 0.0, 1.0)
    closest = rel - t[..., None] * d
    dist_sq = np.einsum("...sj,...sj->...s", closest, closest)
    return float(np.sqrt(dist_sq.min()))


def field_at(
    polyline: NDArray[np.floating],
    current: float,
    turns: int,
    point: NDArray[np.floating],
    *,
    check_clearance: bool = True,
) -> NDArray[np.float64]:
    """Magnetic field of a polyline loop at one or many points.

    Each straight segment from a to b contributes the exact thin-wire field

        B = mu0*I/(4*pi) * (r_a x r_b) * (|r_a| + |r_b|)
            / (|r_a| |r_b| (|r_a| |r_b| + r_a . r_b))

    with r_a, r_b the vectors from the segment ends to the field point.
    The result is linear in ``current`` and ``turns``.

    Args:
        polyline: Closed polyline vertices, shape (S+1, 3).
        current: Signed loop current, A.
        turns: Number of turns (multiplies the single-loop field).
        point: Field point(s), shape (3,) or (..., 3).
        check_clearance: Verify the points keep ``CLEARANCE`` from the wire.

    Returns:
        Field in tesla, same leading shape as ``point``.

    Raises:
        SingularityError: A point lies within ``CLEARANCE`` of a segment.
    """
    poly = np.asarray(polyline, dtype=np.float64)
    pts = np.asarray(point, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)

    if check_clearance:
        clearance = _segment_clearance(poly, pts)
        if clearance < CLEARANCE:
            raise SingularityError(
                f"field point within {clearance:.3e} m of a wire segment "
                f"(minimum clearance {CLEARANCE:.0e} m)"
            )

    r_a = pts[..., None, :] - poly[:-1]  # (..., S, 3)
    r_b = pts[..., None, :] - poly[1:]
    na = np.linalg.norm(r_a, axis=-1)
    nb = np.linalg.norm(r_b, axis=-1)
    cross = np.cross(r_a, r_b)
    denom = na * nb * (na * nb + np.einsum("...sj,...sj->...s", r_a, r_b))
    coeff = (na + nb) / denom
    b = MU_0 / (4.0 * np.pi) * current * turns * np.einsum(
        "...s,...sj->...j", coeff, cross
    )
    return b[0] if single else b


def field_of_coils(
    coils: Sequence["Coil"],
    point: NDArray[np.floating],
    *,
    check_clearance: bool = True,
) -> NDArray[np.float64]:
    """Superposed field of a set of energised coils."""
    pts = np.asarray(point, dtype=np.float64)
    total = np.zeros(pts.shape, dtype=np.float64)
    for coil in coils:
        if coil.current == 0.0:
            continue
        total += field_at(
            coil.polyline,
            coil.current,
            coil.spec.turns,
            pts,
            check_clearance=check_clearance,
        )
    return total


def field_gradient(
    coils: Sequence["Coil"],
    point: NDArray[np.floating],
    *,
    step: float = GRADIENT_STEP,
) -> NDArray[np.float64]:
    """Field Jacobian J[i, j] = dB_i/dx_j by central differences.

    Args:
        coils: Energised coils to superpose.
        point: Evaluation point, shape (3,).
        step: Central-difference step, m.

    Returns:
        3x3 Jacobian in T/m.
    """
    pt = np.asarray(point, dtype=np.float64).reshape(3)
    # One batched field call: the six probe points around `pt`.
    offsets = np.zeros((6, 3))
    for j in range(3):
        offsets[2 * j, j] = step
        offsets[2 * j + 1, j] = -step
    fields = field_of_coils(coils, pt + offsets)
    jac = np.empty((3, 3), dtype=np.float64)
    for j in range(3):
        jac[:, j] = (fields[2 * j] - fields[2 * j + 1]) / (2.0 * step)
    return jac


def sample_field(
    coils: Sequence["Coil"],
    point: NDArray[np.floating],
    *,
    step: float = GRADIENT_STEP,
) -> FieldSample:
    """Field and gradient bundled for one point."""
    pt = np.asarray(point, dtype=np.float64).reshape(3)
    return FieldSample(
        position=pt,
        b=field_of_coils(coils, pt),
        grad_b=field_gradient(coils, pt, step=step),
    )


# ---------------------------------------------------------------------------
# Dipole wrench
# ---------------------------------------------------------------------------


def wrench_on_dipole(
    coils: Sequence["Coil"],
    magnet: MagnetSpec,
    position: NDArray[np.floating],
    moment_dir: NDArray[np.floating],
    *,
    step: float = GRADIENT_STEP,
    jacobian_mode: str = "full",
) -> Wrench:
    """Force and torque on the point-dipole magnet.

    The force uses the full-Jacobian dipole form ``F = J^T m``; the torque is
    ``T = m x B``.  ``jacobian_mode="diagonal"`` keeps only the diagonal
    Jacobian entries (``F_i = J_ii * m_i``), retained for comparison with the
    diagonal-only convention some references use.

    Args:
        coils: Energised coils.
        magnet: Magnet physical constants.
        position: Dipole centre in the capsule frame, m.
        moment_dir: Magnetisation direction (normalised internally).
        step: Gradient central-difference step, m.
        jacobian_mode: "full" (default) or "diagonal".

    Returns:
        Wrench with force in N and torque in N*m.
    """
    if jacobian_mode not in ("full", "diagonal"):
        raise ValueError(f"unknown jacobian_mode {jacobian_mode!r}")
    pt = np.asarray(position, dtype=np.float64).reshape(3)
    direction = np.asarray(moment_dir, dtype=np.float64).reshape(3)
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        raise ValueError("moment_dir must be nonzero")
    moment = magnet.moment_magnitude * direction / norm

    jac = field_gradient(coils, pt, step=step)
    if jacobian_mode == "full":
        force = jac.T @ moment
    else:
        force = np.diag(jac) * moment
    torque = np.cross(moment, field_of_coils(coils, pt))
    return Wrench(force=force, torque=torque)


# ---------------------------------------------------------------------------
# Energised coil wrapper
# ---------------------------------------------------------------------------


class Coil:
    """A coil spec with an instantaneous current and a cached polyline."""

    def __init__(self, spec: CoilSpec, current: float | None = None) -> None:
        self.spec = spec
        self.current = spec.current_amplitude if current is None else current
        self._polyline: NDArray[np.float64] | None = None

    @property
    def polyline(self) -> NDArray[np.float64]:
        if self._polyline is None:
            self._polyline = discretize_ellipse(self.spec)
        return self._polyline

    def with_current(self, current: float) -> "Coil":
        """Copy of this coil at a different current, sharing the polyline."""
        other = Coil(self.spec, current)
        other._polyline = self.polyline
        return other

    def field(self, point: NDArray[np.floating]) -> NDArray[np.float64]:
        return field_at(self.polyline, self.current, self.spec.turns, point)
