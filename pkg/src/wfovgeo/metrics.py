"""Evaluation metrics: pairwise pose accuracies, trajectory errors,
point-cloud accuracy/completion/normal-consistency, and depth metrics."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .align import umeyama
from .camera import ScalarMap
from .errors import InputError
from .pose import Pose, relative_pose, rotation_geodesic

_ZERO_TRANS_EPS = 1e-12


def pairwise_pose_errors(pred: Sequence[Pose], gt: Sequence[Pose]):
    """Rotation and translation-direction errors over unordered pose pairs.

    Returns (rot_deg, trans_deg, trans_valid): translation errors are angles
    between relative translation directions; pairs whose ground-truth
    relative translation is zero-length are flagged invalid. A zero predicted
    translation against a non-zero ground truth counts as 180 degrees.
    """
    if len(pred) != len(gt):
        raise InputError("pose sets must have equal counts")
    n = len(pred)
    if n < 2:
        raise InputError("need at least two poses")
    rot, trans, valid = [], [], []
    for i in range(n):
        for j in range(i + 1, n):
            rel_hat = relative_pose(pred[i], pred[j])
            rel_gt = relative_pose(gt[i], gt[j])
            rot.append(np.degrees(rotation_geodesic(rel_hat.rotation, rel_gt.rotation)))
            t_hat = rel_hat.translation
            t_gt = rel_gt.translation
            n_hat = np.linalg.norm(t_hat)
            n_gt = np.linalg.norm(t_gt)
            if n_gt <= _ZERO_TRANS_EPS:
                trans.append(np.nan)
                valid.append(False)
            elif n_hat <= _ZERO_TRANS_EPS:
                trans.append(180.0)
                valid.append(True)
            else:
                c = np.clip(np.dot(t_hat, t_gt) / (n_hat * n_gt), -1.0, 1.0)
                trans.append(np.degrees(np.arccos(c)))
                valid.append(True)
    return np.asarray(rot), np.asarray(trans), np.asarray(valid)


def rra_rta(pred: Sequence[Pose], gt: Sequence[Pose], tau: float):
    """Percentage of pose pairs with rotation / translation error below tau degrees."""
    rot, trans, valid = pairwise_pose_errors(pred, gt)
    rra = 100.0 * np.count_nonzero(rot < tau) / rot.size
    if not valid.any():
        raise InputError("no pose pair has a non-zero ground-truth translation")
    rta = 100.0 * np.count_nonzero(trans[valid] < tau) / int(valid.sum())
    return float(rra), float(rta)


def auc_at(pred: Sequence[Pose], gt: Sequence[Pose], tau_max: int = 30) -> float:
    """Mean over integer thresholds 1..tau_max of min(RRA, RTA), in percent."""
    if tau_max < 1:
        raise InputError("tau_max must be at least 1")
    rot, trans, valid = pairwise_pose_errors(pred, gt)
    if not valid.any():
        raise InputError("no pose pair has a non-zero ground-truth translation")
    tv = trans[valid]
    acc = 0.0
    for tau in range(1, tau_max + 1):
        rra = 100.0 * np.count_nonzero(rot < tau) / rot.size
        rta = 100.0 * np.count_nonzero(tv < tau) / tv.size
        acc += min(rra, rta)
    return float(acc / tau_max)


def _positions(poses: Sequence[Pose]) -> np.ndarray:
    return np.asarray([p.translation for p in poses])


def ate(pred: Sequence[Pose], gt: Sequence[Pose]) -> float:
    """RMSE of predicted positions after Umeyama-with-scale alignment."""
    if len(pred) != len(gt):
        raise InputError("pose sets must have equal counts")
    if len(pred) < 3:
        raise InputError("trajectory alignment needs at least 3 poses")
    pos_p = _positions(pred)
    pos_g = _positions(gt)
    if np.array_equal(pos_p, pos_g):
        return 0.0  # the aligning similarity is exactly the identity
    sim = umeyama(pos_p, pos_g, with_scale=True)
    resid = sim.apply(pos_p) - pos_g
    return float(np.sqrt(np.mean(np.sum(resid ** 2, axis=1))))


def rpe(pred: Sequence[Pose], gt: Sequence[Pose]):
    """Relative pose error over consecutive frames.

    Returns (translation RMSE in meters, rotation RMSE in degrees); the
    predicted relative translations are scaled by the trajectory-alignment
    scale before comparison.
    """
    if len(pred) != len(gt):
        raise InputError("pose sets must have equal counts")
    n = len(pred)
    if n < 2:
        raise InputError("need at least two poses")
    pos_p = _positions(pred)
    pos_g = _positions(gt)
    if n >= 3 and not np.array_equal(pos_p, pos_g):
        scale = umeyama(pos_p, pos_g, with_scale=True).scale
    else:
        scale = 1.0
    t_err = []
    r_err = []
    for i in range(n - 1):
        rel_hat = relative_pose(pred[i], pred[i + 1])
        rel_gt = relative_pose(gt[i], gt[i + 1])
        t_err.append(np.linalg.norm(scale * rel_hat.translation - rel_gt.translation))
        r_err.append(np.degrees(rotation_geodesic(rel_hat.rotation, rel_gt.rotation)))
    return float(np.sqrt(np.mean(np.square(t_err)))), float(np.sqrt(np.mean(np.square(r_err))))


def accuracy_completion(pred_cloud, gt_cloud) -> dict:
    """Nearest-neighbor distances between clouds, both directions.

    Accuracy: predicted -> ground truth; completion: ground truth ->
    predicted. Clouds are assumed already aligned.
    """
    pred = np.asarray(pred_cloud, dtype=float).reshape(-1, 3)
    gt = np.asarray(gt_cloud, dtype=float).reshape(-1, 3)
    if pred.shape[0] == 0 or gt.shape[0] == 0:
        raise InputError("point clouds must be non-empty")
    d_pg, _ = cKDTree(gt).query(pred)
    d_gp, _ = cKDTree(pred).query(gt)
    return {
        "acc_mean": float(np.mean(d_pg)),
        "acc_median": float(np.median(d_pg)),
        "comp_mean": float(np.mean(d_gp)),
        "comp_median": float(np.median(d_gp)),
    }


def normal_consistency(pred_cloud, pred_normals, gt_cloud, gt_normals) -> dict:
    """Symmetrized |cos| agreement between normals of nearest neighbors."""
    pred = np.asarray(pred_cloud, dtype=float).reshape(-1, 3)
    gt = np.asarray(gt_cloud, dtype=float).reshape(-1, 3)
    pn = np.asarray(pred_normals, dtype=float).reshape(-1, 3)
    gn = np.asarray(gt_normals, dtype=float).reshape(-1, 3)
    if pred.shape != pn.shape or gt.shape != gn.shape:
        raise InputError("each point needs exactly one normal")
    if pred.shape[0] == 0 or gt.shape[0] == 0:
        raise InputError("point clouds must be non-empty")
    for arr in (pn, gn):
        if np.abs(np.linalg.norm(arr, axis=1) - 1.0).max() > 1e-6:
            raise InputError("normals must be unit-length")
    _, idx_pg = cKDTree(gt).query(pred)
    _, idx_gp = cKDTree(pred).query(gt)
    fwd = np.abs(np.sum(pn * gn[idx_pg], axis=1))
    bwd = np.abs(np.sum(gn * pn[idx_gp], axis=1))
    return {
        "nc_mean": float((np.mean(fwd) + np.mean(bwd)) / 2.0),
        "nc_median": float((np.median(fwd) + np.median(bwd)) / 2.0),
    }


def depth_metrics(pred: ScalarMap, gt: ScalarMap) -> dict:
    """Median-scaled monocular depth metrics.

    Predictions are rescaled by median(gt) / median(pred) before computing
    AbsRel, RMSE and the delta < 1.25^k inlier fractions (strict inequality).
    """
    if pred.values.shape != gt.values.shape:
        raise InputError("depth maps have different dimensions")
    both = pred.mask & gt.mask
    if not both.any():
        raise InputError("mask intersection is empty")
    g = gt.values[both]
    p = pred.values[both]
    if np.any(g <= 0.0) or np.any(p <= 0.0):
        raise InputError("depths must be positive on the mask")
    p = p * (np.median(g) / np.median(p))
    abs_rel = float(np.mean(np.abs(p - g) / g))
    rmse = float(np.sqrt(np.mean((p - g) ** 2)))
    ratio = np.maximum(p / g, g / p)
    return {
        "abs_rel": abs_rel,
        "rmse": rmse,
        "delta_1": float(np.mean(ratio < 1.25)),
        "delta_2": float(np.mean(ratio < 1.25 ** 2)),
        "delta_3": float(np.mean(ratio < 1.25 ** 3)),
    }
