"""Wide field-of-view camera models and pixel <-> ray <-> point mappings.

Conventions, fixed for the whole package:

* Right-handed camera frame, +z forward along the optical axis, +x right,
  +y down (pinhole and fisheye).
* Equirectangular frames look down +z at longitude 0 / latitude 0; +y points
  to the north pole (latitude +pi/2); longitude increases toward +x.
* Pixel (u, v) is sampled at its center (u + 0.5, v + 0.5); ``project``
  returns continuous coordinates in which those centers live.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .errors import InputError, NumericalError

_KB_NEWTON_TOL = 1e-10
_KB_NEWTON_MAX_ITER = 50


class CameraClass(Enum):
    """Closed set of camera-class labels used to key coefficient sets."""

    PINHOLE = "pinhole"
    FISHEYE = "fisheye"
    SPHERE = "sphere"


@dataclass(frozen=True)
class RayField:
    """Per-pixel unit viewing directions with a validity mask.

    dirs: (H, W, 3) float array, unit-norm wherever mask is True.
    mask: (H, W) bool array.
    """

    dirs: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        dirs = np.asarray(self.dirs, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if dirs.ndim != 3 or dirs.shape[2] != 3 or mask.shape != dirs.shape[:2]:
            raise InputError("ray field shapes are inconsistent")
        object.__setattr__(self, "dirs", dirs)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.dirs.shape[0]

    @property
    def width(self) -> int:
        return self.dirs.shape[1]


@dataclass(frozen=True)
class ScalarMap:
    """H x W scalar field (radial distances, uncertainties) plus mask."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2 or mask.shape != values.shape:
            raise InputError("scalar map shapes are inconsistent")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


RadialMap = ScalarMap
UncertaintyMap = ScalarMap


@dataclass(frozen=True)
class PointMap:
    """H x W grid of 3D points (camera-local, meters) plus mask."""

    points: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if points.ndim != 3 or points.shape[2] != 3 or mask.shape != points.shape[:2]:
            raise InputError("point map shapes are inconsistent")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.points.shape[0]

    @property
    def width(self) -> int:
        return self.points.shape[1]


def pointmap_from_rays(rays: RayField, radial: ScalarMap) -> PointMap:
    """Point map as direction * radial distance, per pixel."""
    if rays.dirs.shape[:2] != radial.values.shape:
        raise InputError("ray field and radial map dimensions differ")
    points = rays.dirs * radial.values[..., None]
    return PointMap(points, rays.mask & radial.mask)


def _check_intrinsics(fx, fy, cx, cy, width, height):
    if width < 1 or height < 1:
        raise InputError("image size must be positive")
    if fx <= 0 or fy <= 0:
        raise InputError("focal lengths must be positive")
    if not (0 <= cx < width and 0 <= cy < height):
        raise InputError("principal point must lie inside the image")


@dataclass(frozen=True)
class Pinhole:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        _check_intrinsics(self.fx, self.fy, self.cx, self.cy, self.width, self.height)


@dataclass(frozen=True)
class KannalaBrandt:
    """Fisheye model with image radius r = f * (theta + k1 theta^3 + ... + k4 theta^9).

    ``fov_deg`` declares the full cone angle the camera is trusted over; the
    distortion polynomial must be strictly monotone on [0, fov/2], and pixels
    beyond the corresponding image circle are masked invalid.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    k1: float
    k2: float
    k3: float
    k4: float
    width: int
    height: int
    fov_deg: float = 180.0

    def __post_init__(self):
        _check_intrinsics(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
        if not (0.0 < self.fov_deg <= 360.0):
            raise InputError("fov_deg must be in (0, 360]")
        theta = np.linspace(0.0, self.theta_max, 4097)
        td = self._distort(theta)
        if np.any(np.diff(td) <= 0.0) or np.any(self._distort_deriv(theta) <= 0.0):
            raise InputError(
                "Kannala-Brandt polynomial is not strictly monotone over the "
                f"declared {self.fov_deg:g} deg field of view")

    @property
    def theta_max(self) -> float:
        """Half of the declared field of view, radians (capped at pi)."""
        return min(np.radians(self.fov_deg) / 2.0, np.pi)

    @property
    def r_max(self) -> float:
        """Largest valid distorted radius, in normalized units."""
        return float(self._distort(np.asarray(self.theta_max)))

    def _distort(self, theta):
        t2 = theta * theta
        return theta * (1.0 + t2 * (self.k1 + t2 * (self.k2 + t2 * (self.k3 + t2 * self.k4))))

    def _distort_deriv(self, theta):
        t2 = theta * theta
        return 1.0 + t2 * (3.0 * self.k1 + t2 * (5.0 * self.k2 + t2 * (7.0 * self.k3 + t2 * 9.0 * self.k4)))


@dataclass(frozen=True)
class Equirectangular:
    width: int
    height: int

    def __post_init__(self):
        if self.height < 1:
            raise InputError("image size must be positive")
        if self.width != 2 * self.height:
            raise InputError("equirectangular images must have width == 2 * height")


CameraModel = Union[Pinhole, KannalaBrandt, Equirectangular]


def camera_class(cam: CameraModel) -> CameraClass:
    if isinstance(cam, Pinhole):
        return CameraClass.PINHOLE
    if isinstance(cam, KannalaBrandt):
        return CameraClass.FISHEYE
    if isinstance(cam, Equirectangular):
        return CameraClass.SPHERE
    raise InputError(f"unknown camera model {type(cam).__name__}")


def _pixel_centers(width: int, height: int):
    v, u = np.mgrid[0:height, 0:width].astype(float)
    return u + 0.5, v + 0.5


def kb_theta_distort(cam: KannalaBrandt, theta):
    """Forward distortion theta_d(theta) = theta + k1 theta^3 + ... + k4 theta^9."""
    return cam._distort(np.asarray(theta, dtype=float))


def kb_theta_inverse(cam: KannalaBrandt, theta_d):
    """Invert the distortion polynomial by safeguarded Newton iteration.

    theta_d may be a scalar or array; values must lie in [0, r_max].
    The result satisfies |theta_d(theta) - theta_d| <= 1e-10.
    """
    td = np.asarray(theta_d, dtype=float)
    scalar = td.ndim == 0
    td = np.atleast_1d(td)
    if np.any(td < -1e-12) or np.any(td > cam.r_max + 1e-9):
        raise InputError("theta_d outside the monotone range of the camera")
    td = np.clip(td, 0.0, cam.r_max)

    lo = np.zeros_like(td)
    hi = np.full_like(td, cam.theta_max)
    theta = np.clip(td, lo, hi)  # identity is a good start for small distortion
    for _ in range(_KB_NEWTON_MAX_ITER):
        f = cam._distort(theta) - td
        if np.all(np.abs(f) <= _KB_NEWTON_TOL):
            break
        lo = np.where(f < 0.0, theta, lo)
        hi = np.where(f > 0.0, theta, hi)
        step = f / cam._distort_deriv(theta)
        trial = theta - step
        outside = ~np.isfinite(trial) | (trial < lo) | (trial > hi)
        theta = np.where(outside, 0.5 * (lo + hi), trial)
    if np.any(np.abs(cam._distort(theta) - td) > 1e-8):
        raise NumericalError("Kannala-Brandt inversion did not converge")
    return float(theta[0]) if scalar else theta


def ray_field(cam: CameraModel) -> RayField:
    """Unit viewing direction for every pixel center of the camera."""
    if isinstance(cam, Pinhole):
        u, v = _pixel_centers(cam.width, cam.height)
        x = (u - cam.cx) / cam.fx
        y = (v - cam.cy) / cam.fy
        d = np.stack([x, y, np.ones_like(x)], axis=-1)
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        return RayField(d, np.ones(d.shape[:2], dtype=bool))

    if isinstance(cam, KannalaBrandt):
        u, v = _pixel_centers(cam.width, cam.height)
        mx = (u - cam.cx) / cam.fx
        my = (v - cam.cy) / cam.fy
        rd = np.hypot(mx, my)
        mask = rd <= cam.r_max * (1.0 + 1e-12)
        theta = np.zeros_like(rd)
        theta[mask] = kb_theta_inverse(cam, rd[mask])
        az = np.arctan2(my, mx)
        st = np.sin(theta)
        d = np.stack([st * np.cos(az), st * np.sin(az), np.cos(theta)], axis=-1)
        center = rd == 0.0
        d[center] = (0.0, 0.0, 1.0)
        d[~mask] = 0.0
        return RayField(d, mask)

    if isinstance(cam, Equirectangular):
        u, v = _pixel_centers(cam.width, cam.height)
        lon = 2.0 * np.pi * u / cam.width - np.pi
        lat = np.pi / 2.0 - np.pi * v / cam.height
        cl = np.cos(lat)
        d = np.stack([cl * np.sin(lon), np.sin(lat), cl * np.cos(lon)], axis=-1)
        return RayField(d, np.ones(d.shape[:2], dtype=bool))

    raise InputError(f"unknown camera model {type(cam).__name__}")


def project(cam: CameraModel, points):
    """Project camera-frame points to continuous pixel coordinates.

    Returns (uv, in_bounds) where uv has shape (..., 2). Pixel centers map to
    half-integer coordinates, so project(ray(u, v) * depth) = (u + .5, v + .5).
    Points that cannot be represented (behind a pinhole, outside the fisheye
    field of view) get in_bounds False and NaN coordinates.
    """
    p = np.asarray(points, dtype=float)
    if p.shape[-1] != 3:
        raise InputError("points must have a trailing dimension of 3")
    norms = np.linalg.norm(p, axis=-1)
    if np.any(norms == 0.0):
        raise InputError("cannot project the zero vector")
    x, y, z = p[..., 0], p[..., 1], p[..., 2]

    if isinstance(cam, Pinhole):
        front = z > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            u = cam.cx + cam.fx * x / z
            v = cam.cy + cam.fy * y / z
        u = np.where(front, u, np.nan)
        v = np.where(front, v, np.nan)
        inb = front & (u >= 0.0) & (u < cam.width) & (v >= 0.0) & (v < cam.height)
    elif isinstance(cam, KannalaBrandt):
        rho = np.hypot(x, y)
        theta = np.arctan2(rho, z)
        in_fov = theta <= cam.theta_max * (1.0 + 1e-12)
        rd = cam._distort(np.minimum(theta, cam.theta_max))
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(rho > 0.0, rd / rho, 0.0)
        u = cam.cx + cam.fx * x * scale
        v = cam.cy + cam.fy * y * scale
        u = np.where(in_fov, u, np.nan)
        v = np.where(in_fov, v, np.nan)
        inb = in_fov & (u >= 0.0) & (u < cam.width) & (v >= 0.0) & (v < cam.height)
    elif isinstance(cam, Equirectangular):
        lon = np.arctan2(x, z)
        lat = np.arcsin(np.clip(y / norms, -1.0, 1.0))
        u = np.mod(lon + np.pi, 2.0 * np.pi) * cam.width / (2.0 * np.pi)
        v = (np.pi / 2.0 - lat) * cam.height / np.pi
        inb = np.ones_like(u, dtype=bool)
    else:
        raise InputError(f"unknown camera model {type(cam).__name__}")

    return np.stack([u, v], axis=-1), inb


_CAMERA_NAMES = {"pinhole": Pinhole, "kannala_brandt": KannalaBrandt,
                 "equirectangular": Equirectangular}


def camera_to_dict(cam: CameraModel) -> dict:
    """JSON-ready description; field names are part of the CLI contract."""
    if isinstance(cam, Pinhole):
        return {"model": "pinhole", "width": cam.width, "height": cam.height,
                "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy}
    if isinstance(cam, KannalaBrandt):
        return {"model": "kannala_brandt", "width": cam.width, "height": cam.height,
                "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
                "k1": cam.k1, "k2": cam.k2, "k3": cam.k3, "k4": cam.k4,
                "fov_deg": cam.fov_deg}
    if isinstance(cam, Equirectangular):
        return {"model": "equirectangular", "width": cam.width, "height": cam.height}
    raise InputError(f"unknown camera model {type(cam).__name__}")


def camera_from_dict(data: dict) -> CameraModel:
    try:
        model = data["model"]
        width = int(data["width"])
        height = int(data["height"])
        if model == "pinhole":
            return Pinhole(float(data["fx"]), float(data["fy"]),
                           float(data["cx"]), float(data["cy"]), width, height)
        if model == "kannala_brandt":
            return KannalaBrandt(float(data["fx"]), float(data["fy"]),
                                 float(data["cx"]), float(data["cy"]),
                                 float(data["k1"]), float(data["k2"]),
                                 float(data["k3"]), float(data["k4"]),
                                 width, height,
                                 float(data.get("fov_deg", 180.0)))
        if model == "equirectangular":
            return Equirectangular(width, height)
    except KeyError as exc:
        raise InputError(f"camera description is missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise InputError(f"camera description is malformed: {exc}") from exc
    raise InputError(f"unknown camera model name {model!r}")
