import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from wfovgeo import (InputError, Pose, ScalarMap, Similarity,
                     accuracy_completion, ate, auc_at, depth_metrics,
                     normal_consistency, rotation_geodesic, rpe, rra_rta,
                     umeyama)
from wfovgeo.pose import rot_y, rot_z


def random_trajectory(n, seed, span=3.0):
    rng = np.random.default_rng(seed)
    poses = []
    for i in range(n):
        angle = 2 * np.pi * i / n
        position = np.array([span * np.cos(angle), 0.1 * i, span * np.sin(angle)])
        poses.append(Pose(rot_y(angle) @ rot_z(0.05 * i), position))
    return poses


def perturb(poses, seed, rot_sigma=0.05, trans_sigma=0.05):
    rng = np.random.default_rng(seed)
    out = []
    for p in poses:
        d_rot = Rotation.from_rotvec(rng.normal(size=3) * rot_sigma).as_matrix()
        out.append(Pose(d_rot @ p.rotation, p.translation + rng.normal(size=3) * trans_sigma))
    return out


def brute_force_pair_errors(pred, gt):
    """Plain double-loop oracle for pairwise rotation/translation errors."""
    rot, trans = [], []
    n = len(pred)
    for i in range(n):
        for j in range(i + 1, n):
            rh = pred[i].rotation.T @ pred[j].rotation
            rg = gt[i].rotation.T @ gt[j].rotation
            rot.append(np.degrees(rotation_geodesic(rh, rg)))
            th = pred[i].rotation.T @ (pred[j].translation - pred[i].translation)
            tg = gt[i].rotation.T @ (gt[j].translation - gt[i].translation)
            c = np.dot(th, tg) / (np.linalg.norm(th) * np.linalg.norm(tg))
            trans.append(np.degrees(np.arccos(np.clip(c, -1, 1))))
    return np.array(rot), np.array(trans)


def test_rra_rta_perfect_and_threshold():
    gt = random_trajectory(8, 0)
    assert rra_rta(gt, gt, 30.0) == (100.0, 100.0)

    rotated = [Pose(rot_z(np.radians(45.0)) @ p.rotation if i else p.rotation,
                    p.translation)
               for i, p in enumerate(gt)]
    # every pair involving view 0 now has a 45 deg rotation error... build a
    # cleaner instance: rotate every second view so all pairs differ
    rotated = [Pose(rot_z(np.radians(45.0 * (i % 2))) @ p.rotation, p.translation)
               for i, p in enumerate(gt)]
    rra, _ = rra_rta(rotated, gt, 30.0)
    want = 100.0 * np.count_nonzero(brute_force_pair_errors(rotated, gt)[0] < 30.0) / 28
    assert rra == want


def test_rra_rta_matches_bruteforce():
    gt = random_trajectory(10, 1)
    pred = perturb(gt, 2)
    rot_o, trans_o = brute_force_pair_errors(pred, gt)
    for tau in (5.0, 15.0, 30.0):
        rra, rta = rra_rta(pred, gt, tau)
        assert rra == 100.0 * np.count_nonzero(rot_o < tau) / rot_o.size
        assert rta == 100.0 * np.count_nonzero(trans_o < tau) / trans_o.size


def test_rra_rta_needs_pairs():
    gt = random_trajectory(3, 3)
    with pytest.raises(InputError):
        rra_rta(gt[:1], gt[:1], 30.0)
    static = [Pose(p.rotation, np.zeros(3)) for p in gt]
    with pytest.raises(InputError):
        rra_rta(static, static, 30.0)


def test_auc_perfect_and_step():
    gt = random_trajectory(6, 4)
    assert auc_at(gt, gt, 30) == 100.0

    # all pair errors exactly 15.5 deg: accuracy 0 up to tau=15, 100 from 16
    base = [Pose(np.eye(3), (float(i), 0.0, 0.0)) for i in range(2)]
    pred = [base[0],
            Pose(rot_z(np.radians(15.5)), base[1].translation)]
    rotated_t = Pose(base[1].rotation,
                     rot_y(np.radians(15.5)) @ base[1].translation)
    pred_t = [base[0], rotated_t]
    # rotation-only error of 15.5 deg
    assert auc_at(pred, base, 30) == pytest.approx(100.0 * 15 / 30)
    # translation-direction-only error of 15.5 deg
    assert auc_at(pred_t, base, 30) == pytest.approx(100.0 * 15 / 30)


def test_auc_matches_direct_summation():
    gt = random_trajectory(9, 5)
    pred = perturb(gt, 6, rot_sigma=0.2, trans_sigma=0.3)
    rot_o, trans_o = brute_force_pair_errors(pred, gt)
    want = np.mean([min(100.0 * np.count_nonzero(rot_o < t) / rot_o.size,
                        100.0 * np.count_nonzero(trans_o < t) / trans_o.size)
                    for t in range(1, 31)])
    assert auc_at(pred, gt, 30) == pytest.approx(want, abs=1e-12)


def test_ate_perfect_and_similarity_invariant():
    gt = random_trajectory(12, 7)
    assert ate(gt, gt) == 0.0

    sim = Similarity(2.5, rot_z(0.7) @ rot_y(-0.2), np.array([4.0, -2.0, 1.0]))
    moved = [Pose(sim.rotation @ p.rotation, sim.apply(p.translation)) for p in gt]
    assert ate(moved, gt) < 1e-9


def test_ate_matches_posthoc_alignment():
    gt = random_trajectory(15, 8)
    pred = perturb(gt, 9, rot_sigma=0.0, trans_sigma=0.2)
    sim = umeyama([p.translation for p in pred], [g.translation for g in gt])
    res = sim.apply(np.array([p.translation for p in pred])) - \
        np.array([g.translation for g in gt])
    want = np.sqrt(np.mean(np.sum(res ** 2, axis=1)))
    assert ate(pred, gt) == pytest.approx(want, rel=1e-12)


def test_rpe_perfect_and_single_rotation():
    gt = random_trajectory(6, 10)
    assert rpe(gt, gt) == (0.0, 0.0)

    pred = [gt[0], Pose(rot_z(np.radians(10.0)) @ gt[1].rotation, gt[1].translation)]
    _, rot_rmse = rpe(pred, gt[:2])
    assert rot_rmse == pytest.approx(10.0, abs=1e-9)


def test_rpe_matches_loop_oracle():
    gt = random_trajectory(10, 11)
    pred = perturb(gt, 12)
    scale = umeyama([p.translation for p in pred],
                    [g.translation for g in gt]).scale
    t_err, r_err = [], []
    for i in range(9):
        rel_hat = pred[i].inverse() @ pred[i + 1]
        rel_gt = gt[i].inverse() @ gt[i + 1]
        t_err.append(np.linalg.norm(scale * rel_hat.translation - rel_gt.translation))
        r_err.append(np.degrees(rotation_geodesic(rel_hat.rotation, rel_gt.rotation)))
    want = (np.sqrt(np.mean(np.square(t_err))), np.sqrt(np.mean(np.square(r_err))))
    got = rpe(pred, gt)
    assert got[0] == pytest.approx(want[0], rel=1e-12)
    assert got[1] == pytest.approx(want[1], rel=1e-12)


def test_accuracy_completion_cases():
    cloud = np.random.default_rng(13).normal(size=(50, 3))
    report = accuracy_completion(cloud, cloud)
    assert all(v == 0.0 for v in report.values())

    report = accuracy_completion(np.array([[0.0, 0.0, 0.0]]),
                                 np.array([[1.0, 0.0, 0.0], [3.0, 0.0, 0.0]]))
    assert report["acc_mean"] == 1.0
    assert report["comp_mean"] == 2.0
    assert report["comp_median"] == 2.0


def test_accuracy_completion_matches_bruteforce():
    rng = np.random.default_rng(14)
    pred = rng.normal(size=(1000, 3))
    gt = rng.normal(size=(900, 3))
    report = accuracy_completion(pred, gt)
    d_pg = np.sqrt(((pred[:, None, :] - gt[None, :, :]) ** 2).sum(-1)).min(axis=1)
    d_gp = np.sqrt(((gt[:, None, :] - pred[None, :, :]) ** 2).sum(-1)).min(axis=1)
    assert report["acc_mean"] == pytest.approx(float(np.mean(d_pg)), rel=1e-12)
    assert report["acc_median"] == pytest.approx(float(np.median(d_pg)), rel=1e-12)
    assert report["comp_mean"] == pytest.approx(float(np.mean(d_gp)), rel=1e-12)
    assert report["comp_median"] == pytest.approx(float(np.median(d_gp)), rel=1e-12)


def test_accuracy_completion_asymmetry():
    rng = np.random.default_rng(15)
    gt = rng.uniform(-1, 1, size=(2000, 3))
    pred = gt[:20]  # sparse subset: accurate but incomplete
    report = accuracy_completion(pred, gt)
    assert report["acc_mean"] == 0.0
    assert report["comp_mean"] > 0.05


def test_normal_consistency_cases():
    rng = np.random.default_rng(16)
    cloud = rng.normal(size=(100, 3))
    normals = rng.normal(size=(100, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    report = normal_consistency(cloud, normals, cloud, normals)
    assert report["nc_mean"] == pytest.approx(1.0)
    assert report["nc_median"] == pytest.approx(1.0)

    x = np.tile([1.0, 0.0, 0.0], (100, 1))
    y = np.tile([0.0, 1.0, 0.0], (100, 1))
    report = normal_consistency(cloud, x, cloud, y)
    assert report["nc_mean"] == 0.0


def test_normal_consistency_matches_bruteforce():
    rng = np.random.default_rng(17)
    pred = rng.normal(size=(300, 3))
    gt = rng.normal(size=(400, 3))
    pn = rng.normal(size=(300, 3))
    pn /= np.linalg.norm(pn, axis=1, keepdims=True)
    gn = rng.normal(size=(400, 3))
    gn /= np.linalg.norm(gn, axis=1, keepdims=True)
    report = normal_consistency(pred, pn, gt, gn)
    idx_pg = np.argmin(((pred[:, None] - gt[None]) ** 2).sum(-1), axis=1)
    idx_gp = np.argmin(((gt[:, None] - pred[None]) ** 2).sum(-1), axis=1)
    fwd = np.abs((pn * gn[idx_pg]).sum(1))
    bwd = np.abs((gn * pn[idx_gp]).sum(1))
    assert report["nc_mean"] == pytest.approx((fwd.mean() + bwd.mean()) / 2, rel=1e-12)
    assert report["nc_median"] == pytest.approx(
        (np.median(fwd) + np.median(bwd)) / 2, rel=1e-12)


def test_normal_consistency_requires_unit_normals():
    cloud = np.ones((5, 3))
    with pytest.raises(InputError):
        normal_consistency(cloud, 2 * np.ones((5, 3)), cloud, np.ones((5, 3)))


def test_depth_metrics_cases():
    rng = np.random.default_rng(18)
    mask = np.ones((10, 10), bool)
    gt = ScalarMap(rng.uniform(1.0, 5.0, size=(10, 10)), mask)
    report = depth_metrics(gt, gt)
    assert (report["abs_rel"], report["rmse"]) == (0.0, 0.0)
    assert (report["delta_1"], report["delta_2"], report["delta_3"]) == (1.0, 1.0, 1.0)

    scaled = ScalarMap(1.2 * gt.values, mask)
    report = depth_metrics(scaled, gt)
    assert report["abs_rel"] < 1e-12
    assert report["rmse"] < 1e-12
    assert report["delta_1"] == 1.0


def test_depth_metrics_matches_loop():
    rng = np.random.default_rng(19)
    mask = rng.random((8, 8)) > 0.2
    gt_vals = rng.uniform(1.0, 5.0, size=(8, 8))
    pred_vals = gt_vals * rng.uniform(0.7, 1.4, size=(8, 8))
    report = depth_metrics(ScalarMap(pred_vals, mask), ScalarMap(gt_vals, mask))

    g = gt_vals[mask]
    p = pred_vals[mask] * np.median(g) / np.median(pred_vals[mask])
    ratio = np.maximum(p / g, g / p)
    assert report["abs_rel"] == pytest.approx(np.mean(np.abs(p - g) / g), rel=1e-12)
    assert report["rmse"] == pytest.approx(np.sqrt(np.mean((p - g) ** 2)), rel=1e-12)
    assert report["delta_1"] == np.mean(ratio < 1.25)
    assert report["delta_2"] == np.mean(ratio < 1.25 ** 2)
    assert report["delta_3"] == np.mean(ratio < 1.25 ** 3)


def test_depth_metrics_validation():
    mask = np.ones((4, 4), bool)
    good = ScalarMap(np.ones((4, 4)), mask)
    with pytest.raises(InputError):
        depth_metrics(good, ScalarMap(np.zeros((4, 4)), mask))
    with pytest.raises(InputError):
        depth_metrics(ScalarMap(np.ones((4, 4)), np.zeros((4, 4), bool)), good)


def test_metrics_permutation_invariance():
    gt = random_trajectory(8, 20)
    pred = perturb(gt, 21)
    perm = np.random.default_rng(22).permutation(8)
    gt_p = [gt[i] for i in perm]
    pred_p = [pred[i] for i in perm]
    assert rra_rta(pred, gt, 30.0) == rra_rta(pred_p, gt_p, 30.0)
    assert ate(pred, gt) == pytest.approx(ate(pred_p, gt_p), rel=1e-9)
    # RPE is frame-order dependent by definition: perturbing the order changes it
    assert rpe(pred, gt) != rpe(pred_p, gt_p)
