"""Scale and rigid alignment between paired point sets.

Contains the closed-form global scale solve (weighted median of coordinate
ratios), Umeyama similarity estimation, point-to-point ICP, and the
evaluation alignment pipeline that chains all three.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError

_ICP_REJECT_FACTOR = 5.0
_PIPELINE_MAX_CORRESP = 5000


@dataclass(frozen=True)
class Similarity:
    """Similarity transform p -> scale * rotation @ p + translation."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if self.scale <= 0.0:
            raise InputError("similarity scale must be positive")
        if abs(np.linalg.det(r) - 1.0) > 1e-9 or np.abs(r @ r.T - np.eye(3)).max() > 1e-9:
            raise InputError("similarity rotation must be in SO(3)")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Similarity":
        return Similarity(1.0, np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return self.scale * (p @ self.rotation.T) + self.translation

    def __matmul__(self, other: "Similarity") -> "Similarity":
        return Similarity(self.scale * other.scale,
                          self.rotation @ other.rotation,
                          self.scale * self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Similarity":
        rt = self.rotation.T
        return Similarity(1.0 / self.scale, rt, -rt @ self.translation / self.scale)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.scale * self.rotation
        m[:3, 3] = self.translation
        return m


def solve_optimal_scale(pred_points, gt_points, weights) -> float:
    """Exact minimizer of sum_k w_k |s * pred_k - gt_k|_1 over pairs.

    The objective expands into scalar coordinate terms; it is convex piecewise
    linear in s and minimized by the weighted median of coordinate ratios
    gt/pred with weights w * |pred| (lower median on ties). Terms with a zero
    predicted coordinate are constant in s and dropped.
    """
    a = np.asarray(pred_points, dtype=float).reshape(-1, 3)
    b = np.asarray(gt_points, dtype=float).reshape(-1, 3)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if a.shape != b.shape or w.shape[0] != a.shape[0]:
        raise InputError("pred, gt and weights must pair up")
    if np.any(w <= 0.0):
        raise InputError("weights must be positive")

    av = a.ravel()
    bv = b.ravel()
    wv = np.repeat(w, 3)
    nz = av != 0.0
    if not nz.any():
        raise InputError("all predicted coordinates are zero; objective is constant")
    ratios = bv[nz] / av[nz]
    wm = wv[nz] * np.abs(av[nz])
    order = np.argsort(ratios, kind="stable")
    cum = np.cumsum(wm[order])
    idx = int(np.searchsorted(cum, 0.5 * cum[-1], side="left"))
    return float(ratios[order][idx])


def umeyama(src, dst, with_scale: bool = True) -> Similarity:
    """Closed-form least-squares similarity from src onto dst.

    Minimizes sum_k || s R src_k + t - dst_k ||^2 via SVD of the
    cross-covariance with determinant sign correction.
    """
    src = np.asarray(src, dtype=float).reshape(-1, 3)
    dst = np.asarray(dst, dtype=float).reshape(-1, 3)
    if src.shape != dst.shape:
        raise InputError("point sets must have equal shapes")
    n = src.shape[0]
    if n < 3:
        raise InputError("need at least 3 point pairs")

    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    ds = src - mu_s
    dd = dst - mu_d
    cov = dd.T @ ds / n
    u, d, vt = np.linalg.svd(cov)
    if d[1] <= max(d[0], 1e-300) * 1e-12:
        raise InputError("degenerate (collinear or coincident) configuration")
    s_fix = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0.0:
        s_fix[2] = -1.0
    rot = u @ np.diag(s_fix) @ vt
    if with_scale:
        var_s = (ds ** 2).sum() / n
        scale = float((d * s_fix).sum() / var_s)
    else:
        scale = 1.0
    trans = mu_d - scale * rot @ mu_s
    return Similarity(scale, rot, trans)


@dataclass(frozen=True)
class ICPResult:
    transform: Similarity
    rms: float
    iterations: int


def _icp_correspondences(tree, points):
    dist, idx = tree.query(points)
    med = np.median(dist)
    keep = dist <= _ICP_REJECT_FACTOR * med if med > 0.0 else np.ones_like(dist, bool)
    rms = float(np.sqrt(np.mean(dist[keep] ** 2)))
    return idx, keep, rms


def icp(src_cloud, dst_cloud, max_iter: int = 50, tol: float = 1e-6) -> ICPResult:
    """Rigid point-to-point ICP of src onto dst.

    Alternates nearest-neighbor association (kd-tree, rejection at 5x the
    median distance) with rigid Umeyama; stops when the RMS change drops
    below tol. Returns the cumulative transform and the final RMS.
    """
    src = np.asarray(src_cloud, dtype=float).reshape(-1, 3)
    dst = np.asarray(dst_cloud, dtype=float).reshape(-1, 3)
    if src.shape[0] == 0 or dst.shape[0] == 0:
        raise InputError("point clouds must be non-empty")

    tree = cKDTree(dst)
    transform = Similarity.identity()
    current = src
    idx, keep, rms = _icp_correspondences(tree, current)
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        if rms <= tol:
            break  # already converged; stepping would only add float noise
        step = umeyama(current[keep], dst[idx[keep]], with_scale=False)
        transform = step @ transform
        current = step.apply(current)
        idx, keep, new_rms = _icp_correspondences(tree, current)
        done = abs(rms - new_rms) < tol
        rms = new_rms
        if done:
            break
    return ICPResult(transform, rms, iterations)


def align_pipeline(pred_cloud, gt_cloud) -> Similarity:
    """Umeyama -> global L1 scale refinement -> rigid ICP, composed.

    Index pairing drives the first two stages when the clouds are
    pixel-aligned (equal length); otherwise a centroid/spread initialization
    is used and the scale refinement is skipped.
    """
    pred = np.asarray(pred_cloud, dtype=float).reshape(-1, 3)
    gt = np.asarray(gt_cloud, dtype=float).reshape(-1, 3)
    if pred.shape[0] < 3 or gt.shape[0] < 3:
        raise InputError("clouds need at least 3 points")
    if np.array_equal(pred, gt):
        return Similarity.identity()

    if pred.shape[0] == gt.shape[0]:
        n = pred.shape[0]
        step = max(1, n // _PIPELINE_MAX_CORRESP)
        sel = np.arange(0, n, step)
        sim = umeyama(pred[sel], gt[sel], with_scale=True)
        aligned = sim.apply(pred)
        w = 1.0 / np.maximum(np.linalg.norm(gt, axis=1), 1e-6)
        s_ref = solve_optimal_scale(aligned, gt, w)
        sim = Similarity(s_ref, np.eye(3), np.zeros(3)) @ sim
        aligned = s_ref * aligned
    else:
        centroid_p = pred.mean(axis=0)
        centroid_g = gt.mean(axis=0)
        spread_p = np.sqrt(np.mean(np.sum((pred - centroid_p) ** 2, axis=1)))
        spread_g = np.sqrt(np.mean(np.sum((gt - centroid_g) ** 2, axis=1)))
        s0 = spread_g / spread_p if spread_p > 0 else 1.0
        sim = Similarity(s0, np.eye(3), centroid_g - s0 * centroid_p)
        aligned = sim.apply(pred)

    result = icp(aligned, gt)
    return result.transform @ sim
