"""Report figures rendered to PNG files alongside the delimited output.

All figures use the Agg backend and fixed metadata so repeated runs produce
byte-identical files.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVE_KW = dict(dpi=110, metadata={"Software": "wfovgeo"})


def _finish(fig, path):
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def save_fit_residual(outdir, residual_deg: np.ndarray, mask: np.ndarray):
    """Heatmap of per-pixel fit residuals in degrees."""
    shown = np.where(mask, residual_deg, np.nan)
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.imshow(shown, cmap="viridis")
    fig.colorbar(im, ax=ax, label="angular error [deg]")
    ax.set_title("SH fit residual")
    ax.set_xlabel("u")
    ax.set_ylabel("v")
    return _finish(fig, os.path.join(outdir, "fit_residual.png"))


def save_pose_figures(outdir, pred_positions, gt_positions, taus, accuracy):
    """Top-down trajectory overlay and the min(RRA, RTA) threshold curve."""
    pred = np.asarray(pred_positions)
    gt = np.asarray(gt_positions)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(gt[:, 0], gt[:, 2], "o-", label="ground truth", ms=3)
    ax.plot(pred[:, 0], pred[:, 2], "x--", label="prediction (aligned)", ms=4)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("z [m]")
    ax.set_aspect("equal")
    ax.legend()
    ax.set_title("trajectory (top view)")
    paths = [_finish(fig, os.path.join(outdir, "trajectory.png"))]

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(taus, accuracy, "-o", ms=3)
    ax.set_xlabel("threshold [deg]")
    ax.set_ylabel("min(RRA, RTA) [%]")
    ax.set_ylim(-2, 102)
    ax.grid(alpha=0.3)
    ax.set_title("pose accuracy curve")
    paths.append(_finish(fig, os.path.join(outdir, "accuracy_curve.png")))
    return paths


def save_points_hist(outdir, dist_pred_to_gt, dist_gt_to_pred):
    """Histograms of nearest-neighbor distances in both directions."""
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = 50
    ax.hist(dist_pred_to_gt, bins=bins, alpha=0.6, label="pred->gt (accuracy)")
    ax.hist(dist_gt_to_pred, bins=bins, alpha=0.6, label="gt->pred (completion)")
    ax.set_xlabel("nearest-neighbor distance [m]")
    ax.set_ylabel("count")
    ax.legend()
    ax.set_title("point cloud distances")
    return _finish(fig, os.path.join(outdir, "point_distances.png"))


def save_depth_error(outdir, error: np.ndarray, mask: np.ndarray):
    shown = np.where(mask, error, np.nan)
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.imshow(shown, cmap="magma")
    fig.colorbar(im, ax=ax, label="|scaled pred - gt| [m]")
    ax.set_title("depth error")
    return _finish(fig, os.path.join(outdir, "depth_error.png"))


def save_loss_breakdown(outdir, breakdown: dict):
    names = sorted(breakdown.keys())
    values = [breakdown[n] for n in names]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(names, values)
    ax.set_ylabel("unweighted term value")
    ax.set_title("loss breakdown")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    return _finish(fig, os.path.join(outdir, "loss_breakdown.png"))
