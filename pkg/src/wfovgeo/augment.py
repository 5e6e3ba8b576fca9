"""Wide field-of-view data augmentations.

Two geometric augmentations: full-sphere rotation of equirectangular views
and pinhole -> fisheye reprojection by forward softmax splatting. Flow
coordinates for splatting are in index space: integer coordinates land
exactly on pixel centers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import (CameraModel, Equirectangular, KannalaBrandt, Pinhole,
                     ScalarMap, project, ray_field)
from .errors import InputError
from .pose import Pose, rot_x, rot_y

_HOLE_WEIGHT = 1e-6
_DEFAULT_ALPHA = 50.0


@dataclass(frozen=True)
class ViewSample:
    """One rendered or captured view: image, radial map, camera, pose."""

    image: np.ndarray  # (H, W, 3) float, values in [0, 1]
    radial: ScalarMap
    cam: CameraModel
    pose: Pose

    def __post_init__(self):
        img = np.asarray(self.image, dtype=float)
        if img.ndim != 3 or img.shape[2] != 3:
            raise InputError("image must be (H, W, 3)")
        if img.shape[:2] != self.radial.values.shape:
            raise InputError("image and radial map dimensions differ")
        object.__setattr__(self, "image", img)


def _bilinear_wrap(grid: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Bilinear sample with longitudinal wrap and pole clamping.

    grid is (H, W) or (H, W, C); x, y are index coordinates (integer =
    pixel center). Columns wrap modulo W, rows clamp to [0, H-1].
    """
    h, w = grid.shape[:2]
    x0 = np.floor(x)
    fx = x - x0
    yc = np.clip(y, 0.0, h - 1.0)  # clamp before the floor so the fraction stays consistent
    y0 = np.floor(yc)
    fy = yc - y0
    c0 = np.mod(x0.astype(int), w)
    c1 = np.mod(c0 + 1, w)
    r0 = y0.astype(int)
    r1 = np.minimum(r0 + 1, h - 1)
    w00 = (1 - fx) * (1 - fy)
    w10 = fx * (1 - fy)
    w01 = (1 - fx) * fy
    w11 = fx * fy
    if grid.ndim == 3:
        w00, w10, w01, w11 = (w[..., None] for w in (w00, w10, w01, w11))
    return (grid[r0, c0] * w00 + grid[r0, c1] * w10
            + grid[r1, c0] * w01 + grid[r1, c1] * w11), (r0, c0, r1, c1)


def rotate_sphere_view(view: ViewSample, rotation: np.ndarray) -> ViewSample:
    """Resample a full-sphere view under an arbitrary rotation.

    An output pixel with direction d is sampled from the input at R^T d via
    bilinear interpolation with longitude wrap and pole clamping. Radial
    values resample identically (rotation about the camera center preserves
    distances) and the pose becomes T @ R^{-1}, so world-frame point maps are
    preserved.
    """
    if not isinstance(view.cam, Equirectangular):
        raise InputError("sphere rotation requires an equirectangular view")
    rot = np.asarray(rotation, dtype=float).reshape(3, 3)
    cam = view.cam
    dirs_out = ray_field(cam).dirs
    dirs_in = dirs_out @ rot  # row-vector form of R^T @ d
    uv, _ = project(cam, dirs_in)
    x = uv[..., 0] - 0.5
    y = uv[..., 1] - 0.5

    image, (r0, c0, r1, c1) = _bilinear_wrap(view.image, x, y)
    radial, _ = _bilinear_wrap(view.radial.values, x, y)
    m = view.radial.mask
    mask = m[r0, c0] & m[r0, c1] & m[r1, c0] & m[r1, c1]

    pose = Pose(view.pose.rotation @ rot.T, view.pose.translation)
    return ViewSample(image, ScalarMap(radial, mask), cam, pose)


def erp_rotate(view: ViewSample, azimuth: float, elevation: float) -> ViewSample:
    """Rotate a full-sphere view by R = R_y(azimuth) @ R_x(elevation).

    Azimuth spins about the ERP north axis, elevation tilts about +x; the
    composition order is fixed here (the sampled ranges do not pin one down).
    An exact zero rotation passes the input through untouched so identity
    augmentation is byte-stable.
    """
    if not isinstance(view.cam, Equirectangular):
        raise InputError("erp_rotate requires an equirectangular view")
    if not (0.0 <= azimuth <= 2.0 * np.pi) or not (0.0 <= elevation <= np.pi):
        raise InputError("azimuth must be in [0, 2*pi] and elevation in [0, pi]")
    if azimuth == 0.0 and elevation == 0.0:
        return view
    return rotate_sphere_view(view, rot_y(azimuth) @ rot_x(elevation))


def softmax_splat(src_image, src_radial, flow, importance, alpha: float,
                  mask=None, out_shape=None):
    """Forward-warp image and radial maps with softmax-weighted splatting.

    Each masked source pixel contributes to the four bilinear neighbors of
    its flow target with weight bilinear_fraction * exp(alpha * importance)
    (importances are shifted by their masked maximum, so uniform importance
    gives unit weights). Returns (image, radial, weight); accumulated weight
    below 1e-6 marks a hole. Holes are reported, never inpainted.
    """
    img = np.asarray(src_image, dtype=float)
    rad = np.asarray(src_radial, dtype=float)
    flo = np.asarray(flow, dtype=float)
    imp = np.asarray(importance, dtype=float)
    h, w = rad.shape
    if img.shape[:2] != (h, w) or flo.shape != (h, w, 2) or imp.shape != (h, w):
        raise InputError("splat input shapes are inconsistent")
    msk = np.ones((h, w), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    out_h, out_w = (h, w) if out_shape is None else out_shape

    if not np.all(np.isfinite(flo[msk])) or not np.all(np.isfinite(imp[msk])):
        raise InputError("flow and importance must be finite at masked pixels")

    sel = msk.ravel()
    x = flo[..., 0].ravel()[sel]
    y = flo[..., 1].ravel()[sel]
    colors = img.reshape(-1, img.shape[2])[sel]
    depths = rad.ravel()[sel]
    imps = imp.ravel()[sel]
    if imps.size:
        weights = np.exp(alpha * (imps - imps.max()))
    else:
        weights = imps

    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0

    acc_img = np.zeros((out_h * out_w, img.shape[2]))
    acc_rad = np.zeros(out_h * out_w)
    acc_w = np.zeros(out_h * out_w)
    for dx, dy, frac in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                         (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        cx = x0 + dx
        cy = y0 + dy
        ok = (cx >= 0) & (cx < out_w) & (cy >= 0) & (cy < out_h) & (frac > 0)
        if not ok.any():
            continue
        lin = (cy[ok].astype(int) * out_w + cx[ok].astype(int))
        contrib = frac[ok] * weights[ok]
        np.add.at(acc_w, lin, contrib)
        np.add.at(acc_rad, lin, contrib * depths[ok])
        np.add.at(acc_img, lin, contrib[:, None] * colors[ok])

    filled = acc_w >= _HOLE_WEIGHT
    out_img = np.zeros_like(acc_img)
    out_rad = np.zeros_like(acc_rad)
    out_img[filled] = acc_img[filled] / acc_w[filled][:, None]
    out_rad[filled] = acc_rad[filled] / acc_w[filled]
    return (out_img.reshape(out_h, out_w, img.shape[2]),
            out_rad.reshape(out_h, out_w),
            acc_w.reshape(out_h, out_w))


def pinhole_to_fisheye(view: ViewSample, target: KannalaBrandt,
                       alpha: float = _DEFAULT_ALPHA):
    """Reproject a pinhole view into a fisheye camera at the same pose.

    Unprojects the source radial map to 3D, projects into the target model,
    and splats with importance -radial so nearer surfaces win occlusions.
    Returns (ViewSample under the target camera, splat weight map); pixels
    with weight below the hole threshold are masked invalid.
    """
    if not isinstance(view.cam, Pinhole):
        raise InputError("source view must be pinhole")
    rays = ray_field(view.cam)
    points = rays.dirs * view.radial.values[..., None]
    mask = rays.mask & view.radial.mask
    uv = np.full(points.shape[:2] + (2,), np.nan)
    inb = np.zeros(points.shape[:2], dtype=bool)
    if mask.any():
        uv_m, inb_m = project(target, points[mask])
        uv[mask] = uv_m
        inb[mask] = inb_m
    mask = mask & inb
    if not mask.any():
        raise InputError("no source pixel projects into the target camera")

    flow = uv - 0.5
    flow[~mask] = 0.0
    importance = np.where(mask, -view.radial.values, 0.0)
    img, rad, weight = softmax_splat(view.image, view.radial.values, flow,
                                     importance, alpha, mask=mask,
                                     out_shape=(target.height, target.width))
    # bilinear tails can leak past the target's image circle; those pixels
    # are outside the camera's valid field regardless of collected weight
    valid = (weight >= _HOLE_WEIGHT) & ray_field(target).mask
    out = ViewSample(img, ScalarMap(rad, valid), target, view.pose)
    return out, weight
