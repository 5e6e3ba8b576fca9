"""Rigid transforms and rotation helpers.

Poses are camera-to-world throughout: X_world = R @ X_cam + t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InputError


@dataclass(frozen=True)
class Pose:
    """SE(3) transform with rotation (3x3) and translation (3,)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(t)):
            raise InputError("pose contains non-finite values")
        if abs(np.linalg.det(r) - 1.0) > 1e-6 or np.abs(r @ r.T - np.eye(3)).max() > 1e-6:
            raise InputError("rotation is not a proper orthonormal matrix")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(m) -> "Pose":
        m = np.asarray(m, dtype=float)
        return Pose(m[:3, :3], m[:3, 3])

    @staticmethod
    def from_quat(quat_xyzw, translation) -> "Pose":
        rot = Rotation.from_quat(np.asarray(quat_xyzw, dtype=float))
        return Pose(rot.as_matrix(), translation)

    def quat(self) -> np.ndarray:
        """Quaternion as (qx, qy, qz, qw), w-last."""
        return Rotation.from_matrix(self.rotation).as_quat()

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def apply(self, points) -> np.ndarray:
        """Transform an (..., 3) array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation


def relative_pose(pose_i: Pose, pose_j: Pose) -> Pose:
    """Pose of frame j expressed in frame i: T_i^{-1} T_j."""
    return pose_i.inverse() @ pose_j


def rotation_geodesic(r_a, r_b) -> float:
    """Geodesic angle between two rotations, arccos((tr(r_b^T r_a) - 1) / 2).

    Evaluated as atan2(|sin|, cos) of the relative rotation: identical inputs
    give an exactly symmetric product, hence exactly zero, where the arccos
    form would return ~1e-8 from the trace rounding one ulp below 3.
    """
    r_a = np.asarray(r_a, dtype=float)
    r_b = np.asarray(r_b, dtype=float)
    rel = r_b.T @ r_a
    cos = (np.trace(rel) - 1.0) / 2.0
    sin = 0.5 * np.linalg.norm((rel[2, 1] - rel[1, 2],
                                rel[0, 2] - rel[2, 0],
                                rel[1, 0] - rel[0, 1]))
    return float(np.arctan2(sin, cos))


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
