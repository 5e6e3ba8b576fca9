"""Analytic box-scene generator: exact ground truth for testing.

A camera inside an axis-aligned box sees, along every ray, exactly one face;
the hit distance, face normal, and a procedural texture value are all
closed-form, which makes rendered views usable as oracles for the geometry
code paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .augment import ViewSample
from .camera import CameraModel, PointMap, ScalarMap, ray_field
from .errors import InputError
from .pose import Pose, rot_y


@dataclass(frozen=True)
class BoxScene:
    """Axis-aligned box interior spanning [-size/2, +size/2] per axis.

    face_textures selects the procedural texture per face in the fixed face
    order (+x, -x, +y, -y, +z, -z).
    """

    size: np.ndarray
    face_textures: tuple = (0, 1, 2, 3, 4, 5)
    trajectory: tuple = ()

    def __post_init__(self):
        size = np.array(self.size, dtype=float).reshape(3)
        if np.any(size <= 0.0):
            raise InputError("box dimensions must be positive")
        size.flags.writeable = False
        object.__setattr__(self, "size", size)
        if len(self.face_textures) != 6:
            raise InputError("need one texture id per face")
        object.__setattr__(self, "trajectory", tuple(self.trajectory))
        for pose in self.trajectory:
            if not self.contains(pose.translation):
                raise InputError("camera positions must lie strictly inside the box")

    def contains(self, position, margin: float = 0.0) -> bool:
        p = np.asarray(position, dtype=float)
        return bool(np.all(np.abs(p) < self.size / 2.0 - margin))


@dataclass(frozen=True)
class RenderedView:
    view: ViewSample
    points: PointMap          # camera-frame points
    normals: np.ndarray       # (H, W, 3) camera-frame face normals
    normal_mask: np.ndarray
    faces: np.ndarray         # (H, W) int face index, -1 where invalid


_FACE_AXIS = np.array([0, 0, 1, 1, 2, 2])
_FACE_SIGN = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
# In-plane texture axes per face (s axis, t axis).
_FACE_UV = ((1, 2), (1, 2), (0, 2), (0, 2), (0, 1), (0, 1))


def _texture(tex_id: int, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Deterministic checkerboard + gradient color in [0, 1], (..., 3)."""
    checker = ((np.floor(s * 8.0) + np.floor(t * 8.0)) % 2.0)
    base = np.array([[0.9, 0.3, 0.3], [0.3, 0.9, 0.3], [0.3, 0.3, 0.9],
                     [0.9, 0.9, 0.3], [0.3, 0.9, 0.9], [0.9, 0.3, 0.9]])[tex_id % 6]
    color = np.empty(s.shape + (3,))
    color[..., 0] = base[0] * (0.35 + 0.4 * checker) + 0.25 * s
    color[..., 1] = base[1] * (0.35 + 0.4 * checker) + 0.25 * t
    color[..., 2] = base[2] * (0.35 + 0.4 * checker) + 0.25 * (1.0 - s)
    return np.clip(color, 0.0, 1.0)


def render_view(scene: BoxScene, cam: CameraModel, pose: Pose) -> RenderedView:
    """Render one view with exact radial distances, normals, and texture.

    For every pixel the nearest positive ray/plane intersection among the six
    box faces gives the radial distance; the normal is the hit face's inward
    (toward the camera) normal, expressed in the camera frame.
    """
    if not scene.contains(pose.translation):
        raise InputError("camera pose lies outside the box")
    rays = ray_field(cam)
    h, w = rays.mask.shape
    d_world = rays.dirs @ pose.rotation.T
    origin = pose.translation
    half = scene.size / 2.0

    t_exit = np.full((h, w), np.inf)
    axis_hit = np.zeros((h, w), dtype=int)
    for axis in range(3):
        da = d_world[..., axis]
        with np.errstate(divide="ignore"):
            bound = np.where(da > 0.0, half[axis], -half[axis])
            t_a = np.where(da != 0.0, (bound - origin[axis]) / da, np.inf)
        closer = t_a < t_exit
        t_exit = np.where(closer, t_a, t_exit)
        axis_hit = np.where(closer, axis, axis_hit)

    mask = rays.mask & np.isfinite(t_exit) & (t_exit > 0.0)
    t_exit = np.where(mask, t_exit, 0.0)
    sign = np.sign(np.take_along_axis(d_world, axis_hit[..., None], axis=-1)[..., 0])
    faces = np.where(mask, 2 * axis_hit + (sign < 0.0), -1)

    radial = ScalarMap(t_exit, mask)
    points = PointMap(rays.dirs * t_exit[..., None], mask)

    # Inward face normal: opposite the ray's sign along the hit axis.
    n_world = np.zeros((h, w, 3))
    rows = np.arange(h)[:, None].repeat(w, 1)
    cols = np.arange(w)[None, :].repeat(h, 0)
    n_world[rows, cols, axis_hit] = -sign
    n_cam = n_world @ pose.rotation  # R^T applied to rows
    n_cam[~mask] = 0.0

    hit_world = origin + d_world * t_exit[..., None]
    image = np.zeros((h, w, 3))
    for face in range(6):
        on = faces == face
        if not on.any():
            continue
        su, tv = _FACE_UV[face]
        s = hit_world[..., su][on] / scene.size[su] + 0.5
        t = hit_world[..., tv][on] / scene.size[tv] + 0.5
        image[on] = _texture(scene.face_textures[face], s, t)

    view = ViewSample(image, radial, cam, pose)
    return RenderedView(view, points, n_cam, mask.copy(), faces)


def make_trajectory(scene: BoxScene, n: int, pattern: str, seed: int = 0) -> list:
    """Deterministic in-box camera trajectories.

    Patterns: ``circle`` (equally spaced on a horizontal circle, facing
    outward), ``line`` (along +x, identity rotations; a single pose sits at
    the box center), ``random`` (Philox-seeded positions and orientations).
    """
    if n < 1:
        raise InputError("need at least one pose")
    half = scene.size / 2.0
    poses = []
    if pattern == "line":
        if n == 1:
            poses = [Pose.identity()]
        else:
            xs = np.linspace(-0.3 * scene.size[0], 0.3 * scene.size[0], n)
            poses = [Pose(np.eye(3), (x, 0.0, 0.0)) for x in xs]
    elif pattern == "circle":
        radius = 0.3 * min(scene.size[0], scene.size[2])
        angles = 2.0 * np.pi * np.arange(n) / n
        for a in angles:
            position = np.array([radius * np.cos(a), 0.0, radius * np.sin(a)])
            yaw = np.arctan2(position[0], position[2])  # face outward, +z toward the wall
            poses.append(Pose(rot_y(yaw), position))
    elif pattern == "random":
        rng = np.random.Generator(np.random.Philox(seed))
        for _ in range(n):
            position = (rng.random(3) - 0.5) * 0.6 * scene.size
            quat = rng.normal(size=4)
            quat /= np.linalg.norm(quat)
            poses.append(Pose.from_quat(quat, position))
    else:
        raise InputError(f"unknown trajectory pattern {pattern!r}")

    for pose in poses:
        if not scene.contains(pose.translation, margin=1e-9):
            raise InputError(f"pattern {pattern!r} places a pose outside the box")
    return poses
