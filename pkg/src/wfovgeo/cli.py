"""Command-line frontend.

Subcommands: fit-rays, eval-pose, eval-points, eval-depth, eval-loss,
augment (erp-rotate | pin2fish), sample, synth. Reports go to stdout as JSON
unless --out is given; --csv writes a one-row delimited file and --fig
renders figures into a directory. Exit codes: 0 ok, 2 input error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io
from .align import align_pipeline
from .augment import ViewSample, erp_rotate, pinhole_to_fisheye
from .camera import KannalaBrandt, ScalarMap, camera_class, ray_field
from .errors import InputError, NumericalError
from .losses import LossWeights, ViewGroundTruth, ViewPrediction, total_loss
from .metrics import (accuracy_completion, ate, auc_at, depth_metrics,
                      normal_consistency, pairwise_pose_errors, rpe, rra_rta)
from .sampler import distance_matrix_from_positions, probability_matrix, sample_views
from .sh import SHBasis, angular_error, fit_coeffs, reconstruct_rays
from .synth import BoxScene, make_trajectory, render_view


def _emit_report(args, report: dict) -> None:
    text = io.dumps_json(report)
    if args.out:
        with open(args.out, "w", encoding="ascii") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _maybe_csv(args, scene: str, report: dict) -> None:
    if getattr(args, "csv", None):
        flat = {k: v for k, v in report.items() if isinstance(v, (int, float)) or v is None}
        io.write_csv_report(args.csv, scene, flat)


def _fig_dir(args):
    if getattr(args, "fig", None):
        os.makedirs(args.fig, exist_ok=True)
        return args.fig
    return None


# ---------------------------------------------------------------- fit-rays

def cmd_fit_rays(args) -> int:
    cam = io.read_camera(args.camera)
    rays = ray_field(cam)
    basis = SHBasis(args.degree)
    coeffs = fit_coeffs(basis, rays, camera_class(cam))
    recon = reconstruct_rays(coeffs, rays.width, rays.height)
    rms, worst = angular_error(recon, rays)
    report = {
        "degree": args.degree,
        "camera_class": coeffs.camera_class.value,
        "rmse_deg": float(np.degrees(rms)),
        "max_deg": float(np.degrees(worst)),
        "coeff_file": args.out,
    }
    if args.out:
        io.write_json(args.out, coeffs.to_dict())
    figdir = _fig_dir(args)
    if figdir:
        from . import plots
        both = recon.mask & rays.mask
        dots = np.clip(np.sum(recon.dirs * rays.dirs, axis=-1), -1.0, 1.0)
        plots.save_fit_residual(figdir, np.degrees(np.arccos(dots)), both)
    sys.stdout.write(io.dumps_json(report))
    return 0


# ---------------------------------------------------------------- eval-pose

def _match_trajectories(pred_path, gt_path):
    pred_ids, pred_poses = io.read_trajectory(pred_path)
    gt_ids, gt_poses = io.read_trajectory(gt_path)
    table = dict(zip(pred_ids, pred_poses))
    if len(table) != len(pred_ids) or sorted(pred_ids) != sorted(gt_ids):
        raise InputError("trajectory ids do not match")
    return [table[i] for i in gt_ids], gt_poses


def cmd_eval_pose(args) -> int:
    pred, gt = _match_trajectories(args.pred, args.gt)
    tau = args.tau
    rra, rta = rra_rta(pred, gt, tau)
    report = {
        "tau_deg": tau,
        "rra": rra,
        "rta": rta,
        "auc": auc_at(pred, gt, int(tau)),
        "ate": ate(pred, gt),
    }
    rpe_trans, rpe_rot = rpe(pred, gt)
    report["rpe_trans"] = rpe_trans
    report["rpe_rot"] = rpe_rot
    figdir = _fig_dir(args)
    if figdir:
        from . import plots
        from .align import umeyama
        pos_pred = np.asarray([p.translation for p in pred])
        pos_gt = np.asarray([p.translation for p in gt])
        sim = umeyama(pos_pred, pos_gt, with_scale=True)
        rot, trans, valid = pairwise_pose_errors(pred, gt)
        taus = np.arange(1, int(tau) + 1)
        curve = [min(100.0 * np.count_nonzero(rot < t) / rot.size,
                     100.0 * np.count_nonzero(trans[valid] < t) / max(int(valid.sum()), 1))
                 for t in taus]
        plots.save_pose_figures(figdir, sim.apply(pos_pred), pos_gt, taus, curve)
    _emit_report(args, report)
    _maybe_csv(args, os.path.basename(args.pred), report)
    return 0


# ---------------------------------------------------------------- eval-points

def cmd_eval_points(args) -> int:
    pred_pts, pred_normals = io.read_ply(args.pred)
    gt_pts, gt_normals = io.read_ply(args.gt)
    sim = align_pipeline(pred_pts, gt_pts)
    aligned = sim.apply(pred_pts)
    report = dict(accuracy_completion(aligned, gt_pts))
    if pred_normals is not None and gt_normals is not None:
        # float32 PLY storage leaves ~1e-7 norm jitter; renormalize
        pn = pred_normals / np.linalg.norm(pred_normals, axis=1, keepdims=True)
        gn = gt_normals / np.linalg.norm(gt_normals, axis=1, keepdims=True)
        rotated = pn @ sim.rotation.T
        report.update(normal_consistency(aligned, rotated, gt_pts, gn))
    else:
        sys.stderr.write("warning: normals missing, normal consistency omitted\n")
        report.update({"nc_mean": None, "nc_median": None})
    report["alignment"] = {
        "scale": sim.scale,
        "rotation": sim.rotation.tolist(),
        "translation": sim.translation.tolist(),
    }
    figdir = _fig_dir(args)
    if figdir:
        from . import plots
        from scipy.spatial import cKDTree
        d_pg, _ = cKDTree(gt_pts).query(aligned)
        d_gp, _ = cKDTree(aligned).query(gt_pts)
        plots.save_points_hist(figdir, d_pg, d_gp)
    _emit_report(args, report)
    _maybe_csv(args, os.path.basename(args.pred), report)
    return 0


# ---------------------------------------------------------------- eval-depth

def _scalar_map_from_pfm(path) -> ScalarMap:
    values = io.read_pfm(path)
    if values.ndim != 2:
        raise InputError(f"{path}: expected a single-channel PFM")
    mask = np.isfinite(values) & (values > 0.0)
    return ScalarMap(np.where(mask, values, 0.0), mask)


def cmd_eval_depth(args) -> int:
    pred = _scalar_map_from_pfm(args.pred)
    gt = _scalar_map_from_pfm(args.gt)
    report = depth_metrics(pred, gt)
    figdir = _fig_dir(args)
    if figdir:
        from . import plots
        both = pred.mask & gt.mask
        p = pred.values[both]
        g = gt.values[both]
        scaled = pred.values * (np.median(g) / np.median(p))
        plots.save_depth_error(figdir, np.abs(scaled - gt.values), both)
    _emit_report(args, report)
    _maybe_csv(args, os.path.basename(args.pred), report)
    return 0


# ---------------------------------------------------------------- eval-loss

def _prediction_views(bundle) -> list:
    views = []
    for i in range(len(bundle.ids)):
        if bundle.rays[i] is None:
            raise InputError(f"prediction view {i} is missing its ray map")
        unc = bundle.uncertainties[i]
        if unc is None:
            zeros = np.zeros_like(bundle.radials[i].values)
            unc = ScalarMap(zeros, bundle.radials[i].mask.copy())
        views.append(ViewPrediction(bundle.rays[i], bundle.radials[i], unc,
                                    bundle.poses[i]))
    return views


def _groundtruth_views(bundle) -> list:
    from .camera import pointmap_from_rays
    views = []
    for i in range(len(bundle.ids)):
        if bundle.rays[i] is None:
            raise InputError(f"ground-truth view {i} is missing its ray map")
        points = pointmap_from_rays(bundle.rays[i], bundle.radials[i])
        # loss normals come from the same 8-neighbor operator on both sides;
        # analytic normals in the bundle are for metric evaluation, not here
        views.append(ViewGroundTruth(points, bundle.radials[i], bundle.rays[i],
                                     bundle.poses[i], None))
    return views


def _weights_from_args(args) -> LossWeights:
    return LossWeights(lambda_normal=args.lambda_normal,
                       lambda_pose=args.lambda_pose,
                       lambda_ray=args.lambda_ray,
                       lambda_rad=args.lambda_rad,
                       lambda_uncer=args.lambda_uncer,
                       lambda_trans=args.lambda_trans,
                       huber_delta=args.huber_delta,
                       beta=args.beta)


def cmd_eval_loss(args) -> int:
    pred = _prediction_views(io.read_scene(args.pred))
    gt = _groundtruth_views(io.read_scene(args.gt))
    result = total_loss(pred, gt, _weights_from_args(args))
    report = {"total": result.total, "scale": result.scale}
    report.update(result.breakdown)
    figdir = _fig_dir(args)
    if figdir:
        from . import plots
        plots.save_loss_breakdown(figdir, result.breakdown)
    _emit_report(args, report)
    return 0


# ---------------------------------------------------------------- augment

def _bundle_view(bundle, index: int) -> ViewSample:
    if bundle.images[index] is None:
        raise InputError(f"view {index} is missing its image")
    return ViewSample(bundle.images[index], bundle.radials[index],
                      bundle.cam, bundle.poses[index])


def cmd_augment(args) -> int:
    bundle = io.read_scene(args.scene)
    os.makedirs(args.out, exist_ok=True)
    out_poses = []
    if args.mode == "erp-rotate":
        rotated_cam = bundle.cam
        for i in range(len(bundle.ids)):
            view = erp_rotate(_bundle_view(bundle, i), args.azimuth, args.elevation)
            out_poses.append(view.pose)
            rays = ray_field(view.cam)
            io.write_scene_view(args.out, i, view.image, view.radial, rays=rays)
        io.write_camera(os.path.join(args.out, "camera.json"), rotated_cam)
    elif args.mode == "pin2fish":
        if not args.target:
            raise InputError("pin2fish requires --target CAMERA.json")
        target = io.read_camera(args.target)
        if not isinstance(target, KannalaBrandt):
            raise InputError("pin2fish target must be a kannala_brandt camera")
        for i in range(len(bundle.ids)):
            view, weight = pinhole_to_fisheye(_bundle_view(bundle, i), target,
                                              alpha=args.alpha)
            out_poses.append(view.pose)
            rays = ray_field(view.cam)
            io.write_scene_view(args.out, i, view.image, view.radial, rays=rays)
            io.write_pfm(os.path.join(args.out, f"weight_{i:03d}.pfm"), weight)
        io.write_camera(os.path.join(args.out, "camera.json"), target)
    else:
        raise InputError(f"unknown augment mode {args.mode!r}")
    io.write_trajectory(os.path.join(args.out, "traj.txt"), bundle.ids, out_poses)
    return 0


# ---------------------------------------------------------------- sample

def cmd_sample(args) -> int:
    _, poses = io.read_trajectory(args.traj)
    positions = [p.translation for p in poses]
    matrix = probability_matrix(distance_matrix_from_positions(positions),
                                temperature=args.temperature)
    samples = [sample_views(matrix, args.k, args.seed + i) for i in range(args.count)]
    report = {
        "k": args.k,
        "temperature": args.temperature,
        "seed": args.seed,
        "samples": samples,
    }
    _emit_report(args, report)
    return 0


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    cam = io.read_camera(args.camera)
    size = [float(x) for x in args.box.split(",")]
    if len(size) != 3:
        raise InputError("--box expects three comma-separated dimensions")
    scene = BoxScene(size)
    poses = make_trajectory(scene, args.views, args.pattern, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    ids = [str(i) for i in range(len(poses))]
    for i, pose in enumerate(poses):
        rendered = render_view(scene, cam, pose)
        zeros = ScalarMap(np.zeros_like(rendered.view.radial.values),
                          rendered.view.radial.mask.copy())
        io.write_scene_view(args.out, i, rendered.view.image, rendered.view.radial,
                            rays=ray_field(cam), normals=rendered.normals,
                            uncertainty=zeros)
    io.write_camera(os.path.join(args.out, "camera.json"), cam)
    io.write_trajectory(os.path.join(args.out, "traj.txt"), ids, poses)
    io.write_json(os.path.join(args.out, "scene.json"),
                  {"box": size, "pattern": args.pattern, "views": args.views,
                   "seed": args.seed})
    return 0


# ---------------------------------------------------------------- parser

def _add_common(parser, out_help="write the JSON report here instead of stdout"):
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="bound on internal parallelism (results are "
                             "independent of this value)")
    parser.add_argument("--out", default=None, help=out_help)


def _add_fig_csv(parser):
    parser.add_argument("--fig", default=None,
                        help="directory for report figures (PNG)")
    parser.add_argument("--csv", default=None,
                        help="write a one-row CSV of the report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wfovgeo",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-rays", help="fit SH coefficients to a camera's ray field")
    p.add_argument("camera", help="camera description JSON")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--fig", default=None, help="directory for report figures (PNG)")
    _add_common(p, out_help="write the fitted coefficient JSON here")
    p.set_defaults(func=cmd_fit_rays)

    p = sub.add_parser("eval-pose", help="pairwise pose and trajectory metrics")
    p.add_argument("pred", help="predicted trajectory (TUM format)")
    p.add_argument("gt", help="ground-truth trajectory (TUM format)")
    p.add_argument("--tau", type=float, default=30.0)
    _add_fig_csv(p)
    _add_common(p)
    p.set_defaults(func=cmd_eval_pose)

    p = sub.add_parser("eval-points", help="point-cloud accuracy / completion / N.C.")
    p.add_argument("pred", help="predicted cloud (PLY)")
    p.add_argument("gt", help="ground-truth cloud (PLY)")
    _add_fig_csv(p)
    _add_common(p)
    p.set_defaults(func=cmd_eval_points)

    p = sub.add_parser("eval-depth", help="monocular depth metrics")
    p.add_argument("pred", help="predicted radial map (PFM)")
    p.add_argument("gt", help="ground-truth radial map (PFM)")
    _add_fig_csv(p)
    _add_common(p)
    p.set_defaults(func=cmd_eval_depth)

    p = sub.add_parser("eval-loss", help="training-loss breakdown on scene bundles")
    p.add_argument("pred", help="prediction scene directory")
    p.add_argument("gt", help="ground-truth scene directory")
    p.add_argument("--lambda-normal", type=float, default=10.0)
    p.add_argument("--lambda-pose", type=float, default=0.1)
    p.add_argument("--lambda-ray", type=float, default=1.0)
    p.add_argument("--lambda-rad", type=float, default=1.0)
    p.add_argument("--lambda-uncer", type=float, default=0.1)
    p.add_argument("--lambda-trans", type=float, default=1.0)
    p.add_argument("--huber-delta", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=0.75)
    p.add_argument("--fig", default=None, help="directory for report figures (PNG)")
    _add_common(p)
    p.set_defaults(func=cmd_eval_loss)

    p = sub.add_parser("augment", help="geometric augmentations on a scene bundle")
    p.add_argument("mode", choices=["erp-rotate", "pin2fish"])
    p.add_argument("scene", help="input scene directory")
    p.add_argument("--azimuth", type=float, default=0.0, help="radians in [0, 2*pi]")
    p.add_argument("--elevation", type=float, default=0.0, help="radians in [0, pi]")
    p.add_argument("--target", default=None, help="target camera JSON (pin2fish)")
    p.add_argument("--alpha", type=float, default=50.0, help="splatting sharpness")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="output scene directory")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("sample", help="distance-softmax view sampling")
    p.add_argument("traj", help="trajectory file (TUM format)")
    p.add_argument("--k", type=int, default=2, help="views per sample")
    p.add_argument("--temperature", type=float, default=1.0, help="softmax temperature, meters")
    p.add_argument("--count", type=int, default=1, help="number of sample lists")
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("synth", help="render analytic box-scene ground truth")
    p.add_argument("--camera", required=True, help="camera description JSON")
    p.add_argument("--views", type=int, default=4)
    p.add_argument("--pattern", choices=["circle", "line", "random"], default="circle")
    p.add_argument("--box", default="4.0,3.0,5.0", help="box dimensions, meters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="output scene directory")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
