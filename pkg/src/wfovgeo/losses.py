"""Training-loss suite over multi-view geometric predictions.

Every loss is a deterministic value (and, where stated, analytic gradient)
computation on numpy arrays; nothing here depends on an autodiff framework.
The global scale recovered for the point loss is treated as a constant when
differentiating (stop-gradient).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .align import solve_optimal_scale
from .camera import PointMap, RayField, ScalarMap, pointmap_from_rays
from .errors import InputError
from .pose import Pose, relative_pose, rotation_geodesic
from .sh import angles_from_dir, unit_vector_angle

# Cyclic 8-neighbor offsets (du, dv), east first, winding toward +v.
_NEIGHBOR_OFFSETS = ((1, 0), (1, 1), (0, 1), (-1, 1),
                     (-1, 0), (-1, -1), (0, -1), (1, -1))


@dataclass(frozen=True)
class LossWeights:
    """Combination weights; defaults follow the training recipe."""

    lambda_normal: float = 10.0
    lambda_pose: float = 0.1
    lambda_ray: float = 1.0
    lambda_rad: float = 1.0
    lambda_uncer: float = 0.1
    lambda_trans: float = 1.0
    huber_delta: float = 0.1
    beta: float = 0.75

    def __post_init__(self):
        values = (self.lambda_normal, self.lambda_pose, self.lambda_ray,
                  self.lambda_rad, self.lambda_uncer, self.lambda_trans,
                  self.huber_delta, self.beta)
        if any(v < 0 for v in values):
            raise InputError("loss weights must be non-negative")


@dataclass(frozen=True)
class ViewPrediction:
    rays: RayField
    radial: ScalarMap
    uncertainty: ScalarMap
    pose: Pose

    def __post_init__(self):
        shape = self.rays.dirs.shape[:2]
        if self.radial.values.shape != shape or self.uncertainty.values.shape != shape:
            raise InputError("prediction maps have inconsistent dimensions")
        on = self.radial.mask & self.rays.mask
        if np.any(self.radial.values[on] <= 0.0):
            raise InputError("radial distances must be positive on the mask")

    def point_map(self) -> PointMap:
        return pointmap_from_rays(self.rays, self.radial)


@dataclass(frozen=True)
class ViewGroundTruth:
    points: PointMap
    radial: ScalarMap
    rays: RayField
    pose: Pose
    normals: Optional["NormalMap"] = None

    def __post_init__(self):
        shape = self.points.points.shape[:2]
        if self.radial.values.shape != shape or self.rays.dirs.shape[:2] != shape:
            raise InputError("ground-truth maps have inconsistent dimensions")
        on = self.points.mask & self.radial.mask
        norms = np.linalg.norm(self.points.points[on], axis=-1)
        if norms.size and np.abs(norms - self.radial.values[on]).max() > 1e-6:
            raise InputError("radial map must equal point norms on the mask")


@dataclass(frozen=True)
class NormalMap:
    vectors: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        m = np.asarray(self.mask, dtype=bool)
        if v.ndim != 3 or v.shape[2] != 3 or m.shape != v.shape[:2]:
            raise InputError("normal map shapes are inconsistent")
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "mask", m)


def _same_length(pred: Sequence, gt: Sequence):
    if len(pred) != len(gt):
        raise InputError("prediction and ground truth must have the same view count")
    if len(pred) == 0:
        raise InputError("need at least one view")


@dataclass(frozen=True)
class PointLossResult:
    value: float
    scale: float
    gradients: tuple  # one (H, W, 3) array per view, d(value)/d(pred points)


def point_loss(pred: Sequence[ViewPrediction], gt: Sequence[ViewGroundTruth]) -> PointLossResult:
    """Scale-aligned weighted L1 point-map loss.

    Predicted points are rays * radial; the shared scale s* comes from
    solve_optimal_scale with weights 1 / gt radial; the loss averages
    w * |s* P_hat - P|_1 over 3 x (total masked pixels). The gradient treats
    s* as constant and uses the sign subgradient (0 at exact zeros).
    """
    _same_length(pred, gt)
    masks, points_hat, points_gt, weights = [], [], [], []
    for p, g in zip(pred, gt):
        pm = p.point_map()
        m = pm.mask & g.points.mask & g.radial.mask
        masks.append(m)
        points_hat.append(pm.points[m])
        points_gt.append(g.points.points[m])
        weights.append(1.0 / g.radial.values[m])
    total = int(sum(m.sum() for m in masks))
    if total == 0:
        raise InputError("no masked pixels in common")

    a = np.concatenate(points_hat)
    b = np.concatenate(points_gt)
    w = np.concatenate(weights)
    scale = solve_optimal_scale(a, b, w)
    resid = scale * a - b
    denom = 3.0 * total
    value = float(np.sum(w[:, None] * np.abs(resid)) / denom)

    grads = []
    offset = 0
    for m in masks:
        n = int(m.sum())
        g_full = np.zeros(m.shape + (3,))
        seg = slice(offset, offset + n)
        g_full[m] = scale * w[seg, None] * np.sign(resid[seg]) / denom
        grads.append(g_full)
        offset += n
    return PointLossResult(value, float(scale), tuple(grads))


def normals_from_pointmap(pm: PointMap) -> NormalMap:
    """8-neighbor cross-product normals on the interior of a point map.

    At each interior pixel whose full 8-neighborhood is valid, sums
    cross(v_k, v_{k+1}) over the cyclically ordered neighbor offsets
    (v_k = neighbor_k - center), normalizes, and orients the result toward
    the camera (visible surfaces face their viewer), so a fronto-parallel
    plane in front of the camera gets normal (0, 0, -1). Boundary,
    incomplete-neighborhood and zero-norm pixels are masked out.
    """
    h, w = pm.mask.shape
    out = np.zeros((h, w, 3))
    out_mask = np.zeros((h, w), dtype=bool)
    if h < 3 or w < 3:
        return NormalMap(out, out_mask)

    center = pm.points[1:-1, 1:-1]
    valid = pm.mask[1:-1, 1:-1].copy()
    diffs = []
    for du, dv in _NEIGHBOR_OFFSETS:
        block = pm.points[1 + dv:h - 1 + dv, 1 + du:w - 1 + du]
        valid &= pm.mask[1 + dv:h - 1 + dv, 1 + du:w - 1 + du]
        diffs.append(block - center)
    acc = np.zeros_like(center)
    for k in range(8):
        acc += np.cross(diffs[k], diffs[(k + 1) % 8])
    facing_away = np.sum(acc * center, axis=-1) > 0.0
    acc[facing_away] *= -1.0
    norms = np.linalg.norm(acc, axis=-1)
    good = valid & (norms > 0.0)
    inner = np.zeros_like(center)
    inner[good] = acc[good] / norms[good][..., None]
    out[1:-1, 1:-1] = inner
    out_mask[1:-1, 1:-1] = good
    return NormalMap(out, out_mask)


@dataclass(frozen=True)
class NormalLossResult:
    total: float   # sum of angles, the canonical value
    mean: float
    pixels: int


def normal_loss(pred_normals: NormalMap, gt_normals: NormalMap) -> NormalLossResult:
    """Sum (and mean) of angular deviations over the mask intersection."""
    if pred_normals.vectors.shape != gt_normals.vectors.shape:
        raise InputError("normal maps have different dimensions")
    both = pred_normals.mask & gt_normals.mask
    n = int(both.sum())
    if n == 0:
        raise InputError("mask intersection is empty")
    ang = unit_vector_angle(pred_normals.vectors[both], gt_normals.vectors[both])
    total = float(ang.sum())
    return NormalLossResult(total, total / n, n)


def huber(x: float, delta: float) -> float:
    """0.5 x^2 inside delta, linear delta (|x| - delta/2) outside."""
    ax = abs(x)
    if ax <= delta:
        return 0.5 * ax * ax
    return delta * (ax - 0.5 * delta)


def pose_loss(pred_poses: Sequence[Pose], gt_poses: Sequence[Pose],
              scale: float, weights: LossWeights = LossWeights()) -> float:
    """Average over ordered view pairs of geodesic rotation error plus a
    Huber penalty on the scale-aligned relative-translation error norm."""
    _same_length(pred_poses, gt_poses)
    n = len(pred_poses)
    if n < 2:
        raise InputError("pose loss needs at least two views")
    acc = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            rel_hat = relative_pose(pred_poses[i], pred_poses[j])
            rel_gt = relative_pose(gt_poses[i], gt_poses[j])
            rot = rotation_geodesic(rel_hat.rotation, rel_gt.rotation)
            err = np.linalg.norm(scale * rel_hat.translation - rel_gt.translation)
            acc += rot + weights.lambda_trans * huber(float(err), weights.huber_delta)
    return acc / (n * (n - 1))


def _wrap_pi(delta: np.ndarray) -> np.ndarray:
    """Wrap angle differences into (-pi, pi]."""
    w = np.mod(delta + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def _asymmetric_l1(delta: np.ndarray, alpha: float) -> float:
    over = delta > 0.0
    return float(alpha * np.abs(delta[over]).sum()
                 + (1.0 - alpha) * np.abs(delta[~over]).sum())


def ray_loss(pred_rays: RayField, gt_rays: RayField, beta: float = 0.75,
             alpha_theta: float = 0.7, alpha_phi: float = 0.5) -> float:
    """Asymmetric angular loss over the spherical angles of the rays.

    Overshoots (predicted angle above ground truth) are weighted alpha,
    undershoots 1 - alpha; azimuth residuals wrap to (-pi, pi]. The result is
    beta * L_theta + (1 - beta) * L_phi, summed over masked pixels.
    """
    if pred_rays.dirs.shape != gt_rays.dirs.shape:
        raise InputError("ray fields have different dimensions")
    both = pred_rays.mask & gt_rays.mask
    if not both.any():
        raise InputError("mask intersection is empty")
    th_hat, ph_hat = angles_from_dir(pred_rays.dirs[both])
    th_gt, ph_gt = angles_from_dir(gt_rays.dirs[both])
    loss_theta = _asymmetric_l1(th_hat - th_gt, alpha_theta)
    loss_phi = _asymmetric_l1(_wrap_pi(ph_hat - ph_gt), alpha_phi)
    return beta * loss_theta + (1.0 - beta) * loss_phi


def radial_loss(pred: ScalarMap, gt: ScalarMap):
    """Mean absolute radial error and its sign subgradient."""
    if pred.values.shape != gt.values.shape:
        raise InputError("radial maps have different dimensions")
    both = pred.mask & gt.mask
    n = int(both.sum())
    if n == 0:
        raise InputError("mask intersection is empty")
    diff = pred.values - gt.values
    value = float(np.abs(diff[both]).mean())
    grad = np.zeros_like(pred.values)
    grad[both] = np.sign(diff[both]) / n
    return value, grad


def uncertainty_loss(pred_radial: ScalarMap, gt_radial: ScalarMap,
                     pred_unc: ScalarMap) -> float:
    """Mean | |D_hat - D| - U_hat | over the mask intersection."""
    return uncertainty_loss_grad(pred_radial, gt_radial, pred_unc)[0]


def uncertainty_loss_grad(pred_radial: ScalarMap, gt_radial: ScalarMap,
                          pred_unc: ScalarMap):
    """Uncertainty loss plus its sign subgradient w.r.t. the prediction."""
    if pred_radial.values.shape != gt_radial.values.shape or \
            pred_unc.values.shape != gt_radial.values.shape:
        raise InputError("maps have different dimensions")
    both = pred_radial.mask & gt_radial.mask & pred_unc.mask
    n = int(both.sum())
    if n == 0:
        raise InputError("mask intersection is empty")
    inner = np.abs(pred_radial.values[both] - gt_radial.values[both])
    diff = inner - pred_unc.values[both]
    grad = np.zeros_like(pred_unc.values)
    grad[both] = -np.sign(diff) / n
    return float(np.abs(diff).mean()), grad


@dataclass(frozen=True)
class TotalLossResult:
    total: float
    breakdown: dict
    scale: float


def total_loss(pred: Sequence[ViewPrediction], gt: Sequence[ViewGroundTruth],
               weights: LossWeights = LossWeights()) -> TotalLossResult:
    """Weighted sum of all loss terms, with the unweighted breakdown.

    The normal term is the canonical per-pixel sum accumulated over views;
    ray losses are summed over views; radial and uncertainty errors are
    pooled over all masked pixels of all views.
    """
    _same_length(pred, gt)
    pt = point_loss(pred, gt)

    normal_total = 0.0
    ray_total = 0.0
    rad_abs = []
    unc_abs = []
    for p, g in zip(pred, gt):
        pred_n = normals_from_pointmap(p.point_map())
        gt_n = g.normals if g.normals is not None else normals_from_pointmap(g.points)
        normal_total += normal_loss(pred_n, gt_n).total
        ray_total += ray_loss(p.rays, g.rays, beta=weights.beta)
        both = p.radial.mask & g.radial.mask
        if not both.any():
            raise InputError("mask intersection is empty")
        diff = np.abs(p.radial.values[both] - g.radial.values[both])
        rad_abs.append(diff)
        both_u = both & p.uncertainty.mask
        if not both_u.any():
            raise InputError("mask intersection is empty")
        inner = np.abs(p.radial.values[both_u] - g.radial.values[both_u])
        unc_abs.append(np.abs(inner - p.uncertainty.values[both_u]))
    radial_value = float(np.concatenate(rad_abs).mean())
    unc_value = float(np.concatenate(unc_abs).mean())
    pose_value = pose_loss([p.pose for p in pred], [g.pose for g in gt],
                           pt.scale, weights)

    breakdown = {
        "points": pt.value,
        "normal": normal_total,
        "pose": pose_value,
        "ray": ray_total,
        "radial": radial_value,
        "uncertainty": unc_value,
    }
    total = (breakdown["points"]
             + weights.lambda_normal * breakdown["normal"]
             + weights.lambda_pose * breakdown["pose"]
             + weights.lambda_ray * breakdown["ray"]
             + weights.lambda_rad * breakdown["radial"]
             + weights.lambda_uncer * breakdown["uncertainty"])
    return TotalLossResult(float(total), breakdown, pt.scale)
