"""Rigid transforms and small rotation helpers.

Everything is plain NumPy: positions are length-3 arrays, orientations are
3x3 rotation matrices.  A ``Pose`` places an object (a coil) in the capsule
body frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

_ORTHO_TOL = 1e-9


def rotation_about(axis: NDArray[np.floating], angle: float) -> NDArray[np.float64]:
    """Rotation matrix for a right-handed rotation about ``axis``.

    Args:
        axis: Rotation axis (need not be normalised, must be nonzero).
        angle: Rotation angle in radians.

    Returns:
        3x3 rotation matrix.
    """
    axis = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        raise ValueError("rotation axis must be nonzero")
    x, y, z = axis / norm
    c, s = np.cos(angle), np.sin(angle)
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def rotation_from_z_to(direction: NDArray[np.floating]) -> NDArray[np.float64]:
    """Rotation matrix taking the local +z axis onto ``direction``.

    The result is orthonormal with determinant +1; the in-plane orientation
    of the local x/y axes is chosen deterministically.

    Args:
        direction: Target direction for the local z axis (nonzero).

    Returns:
        3x3 rotation matrix whose third column is ``direction`` normalised.
    """
    d = np.asarray(direction, dtype=np.float64)
    norm = np.linalg.norm(d)
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    w = d / norm
    # Pick a helper axis that is not (anti-)parallel to w.
    helper = np.array([0.0, 0.0, 1.0]) if abs(w[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(helper, w)
    u /= np.linalg.norm(u)
    v = np.cross(w, u)
    return np.column_stack([u, v, w])


def quaternion_to_matrix(q: NDArray[np.floating]) -> NDArray[np.float64]:
    """Convert a unit quaternion ``[w, x, y, z]`` to a rotation matrix."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise ValueError("quaternion must have shape (4,)")
    n = np.linalg.norm(q)
    if abs(n - 1.0) > 1e-6:
        raise ValueError(f"quaternion norm {n:.6g} is not 1")
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass(frozen=True)
class Pose:
    """Rigid transform placing an object in the capsule frame.

    Attributes:
        position: Translation, metres.
        rotation: 3x3 orthonormal rotation matrix (local -> capsule frame).
    """

    position: NDArray[np.float64] = field(
        default_factory=lambda: np.zeros(3, dtype=np.float64)
    )
    rotation: NDArray[np.float64] = field(
        default_factory=lambda: np.eye(3, dtype=np.float64)
    )

    def __post_init__(self) -> None:
        pos = np.asarray(self.position, dtype=np.float64).reshape(3)
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "rotation", rot)
        if not np.allclose(rot @ rot.T, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("pose rotation is not orthonormal")
        if np.linalg.det(rot) < 0.0:
            raise ValueError("pose rotation must be proper (det +1)")

    def transform(self, local_points: NDArray[np.floating]) -> NDArray[np.float64]:
        """Map points from the local frame to the capsule frame.

        Args:
            local_points: Array of shape (..., 3).

        Returns:
            Transformed points, same shape.
        """
        pts = np.asarray(local_points, dtype=np.float64)
        return pts @ self.rotation.T + self.position

    @property
    def axis(self) -> NDArray[np.float64]:
        """Local +z direction expressed in the capsule frame."""
        return self.rotation[:, 2].copy()
