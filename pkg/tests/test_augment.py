import numpy as np
import pytest

from wfovgeo import (Equirectangular, InputError, KannalaBrandt,
                     Pinhole, Pose, ScalarMap, ViewSample, erp_rotate,
                     pinhole_to_fisheye, ray_field, render_view, softmax_splat)
from wfovgeo.augment import rotate_sphere_view
from wfovgeo.pose import rot_x, rot_y

from conftest import erp, pinhole_fov90


def erp_box_view(scene, pose, height=64):
    return render_view(scene, erp(height), pose).view


def rotated_pose(pose, rot):
    return Pose(pose.rotation @ rot.T, pose.translation)


# ------------------------------------------------------------- erp_rotate

def test_erp_rotate_identity_is_passthrough(box_scene):
    view = erp_box_view(box_scene, Pose.identity(), 16)
    out = erp_rotate(view, 0.0, 0.0)
    assert out.image is view.image
    assert out.radial is view.radial
    assert out.pose is view.pose


def test_erp_rotate_full_turn(box_scene):
    view = erp_box_view(box_scene, Pose.identity(), 32)
    out = erp_rotate(view, 2.0 * np.pi, 0.0)
    assert np.abs(out.image - view.image).max() < 1e-6
    assert np.abs(out.radial.values - view.radial.values).max() < 1e-6


def test_erp_rotate_requires_erp_and_valid_angles(box_scene):
    view = erp_box_view(box_scene, Pose.identity(), 16)
    pin_view = ViewSample(np.zeros((4, 4, 3)),
                          ScalarMap(np.ones((4, 4)), np.ones((4, 4), bool)),
                          pinhole_fov90(4), Pose.identity())
    with pytest.raises(InputError):
        erp_rotate(pin_view, 0.1, 0.1)
    with pytest.raises(InputError):
        erp_rotate(view, -0.1, 0.0)
    with pytest.raises(InputError):
        erp_rotate(view, 0.0, 3.5)


def test_erp_rotate_world_consistency(box_scene):
    """Unprojecting the rotated view with its updated pose must reproduce the
    original world geometry (checked against a fresh analytic render)."""
    height = 64
    pose = Pose(rot_y(0.2), (0.4, -0.1, 0.3))
    view = erp_box_view(box_scene, pose, height)
    azimuth, elevation = 0.8, 0.5
    out = erp_rotate(view, azimuth, elevation)

    # world points of the rotated view: pose' applied to dir * radial
    dirs = ray_field(out.cam).dirs
    world = out.pose.apply(dirs * out.radial.values[..., None])

    exact = render_view(box_scene, out.cam, out.pose)
    world_exact = out.pose.apply(exact.points.points)

    # 2 x angular pixel resolution * distance bounds the interpolation error
    pixel_angle = np.pi / height
    bound = 2.0 * pixel_angle * exact.view.radial.values.max()
    err = np.linalg.norm((world - world_exact)[out.radial.mask], axis=-1)
    assert np.quantile(err, 0.99) < bound
    assert out.pose.rotation is not view.pose.rotation


def test_erp_rotate_composition(box_scene):
    height = 48
    pose = Pose(np.eye(3), (0.2, 0.0, -0.3))
    view = erp_box_view(box_scene, pose, height)
    r1 = rot_y(0.7) @ rot_x(0.3)
    r2 = rot_y(5.1) @ rot_x(1.9)

    double = rotate_sphere_view(rotate_sphere_view(view, r1), r2)
    composed = rotate_sphere_view(view, r2 @ r1)

    # single-pass interpolation error, measured against exact renders
    exact_single = render_view(box_scene, view.cam, rotated_pose(pose, r1)).view
    single = rotate_sphere_view(view, r1)
    err_single = np.abs(single.radial.values - exact_single.radial.values).max()

    exact_double = render_view(box_scene, view.cam,
                               rotated_pose(pose, r2 @ r1)).view
    err_composed = np.abs(composed.radial.values - exact_double.radial.values).max()
    err_double = np.abs(double.radial.values - exact_double.radial.values).max()
    assert err_composed <= 2.0 * err_single + 1e-12
    assert err_double <= 2.0 * err_single + 1e-12
    assert np.abs(double.pose.matrix() - composed.pose.matrix()).max() < 1e-12


def weighted_quantiles(values, weights, grid):
    order = np.argsort(values)
    v = values[order]
    cum = np.cumsum(weights[order])
    cum = cum / cum[-1]
    return np.interp(grid, cum, v)


def test_erp_rotate_radial_histogram_preserved(box_scene):
    # the rotation-invariant quantity is the solid-angle-weighted radial
    # distribution: ERP rows near the poles oversample the sphere
    from wfovgeo.sh import grid_angles
    view = erp_box_view(box_scene, Pose(np.eye(3), (0.1, 0.2, -0.2)), 64)
    out = erp_rotate(view, 1.1, 0.4)
    theta, _ = grid_angles(view.cam.width, view.cam.height)
    weights = np.sin(theta).ravel()
    grid = np.linspace(0.005, 0.995, 200)
    qa = weighted_quantiles(view.radial.values.ravel(), weights, grid)
    qb = weighted_quantiles(out.radial.values.ravel(), weights, grid)
    wasserstein = np.mean(np.abs(qa - qb))
    assert wasserstein < 0.01 * np.mean(qa)


# ------------------------------------------------------------- softmax splat

def splat_single(value, importance, target, alpha=10.0, shape=(5, 5)):
    img = np.zeros(shape + (3,))
    img[2, 2] = value
    rad = np.zeros(shape)
    rad[2, 2] = 1.7
    flow = np.zeros(shape + (2,))
    flow[2, 2] = target
    imp = np.zeros(shape)
    imp[2, 2] = importance
    mask = np.zeros(shape, bool)
    mask[2, 2] = True
    return softmax_splat(img, rad, flow, imp, alpha, mask=mask)


def test_splat_exact_integer_target_copies():
    img, rad, weight = splat_single((0.3, 0.6, 0.9), importance=-4.2, target=(3.0, 1.0))
    assert np.array_equal(img[1, 3], (0.3, 0.6, 0.9))
    assert rad[1, 3] == 1.7
    assert weight[1, 3] == 1.0
    assert weight.sum() == 1.0


def test_splat_equal_importance_averages():
    img = np.zeros((1, 2, 3))
    img[0, 0] = (1.0, 0.0, 0.0)
    img[0, 1] = (0.0, 1.0, 0.0)
    rad = np.array([[2.0, 4.0]])
    flow = np.zeros((1, 2, 2))  # both pixels land on target (0, 0)
    imp = np.zeros((1, 2))
    out_img, out_rad, weight = softmax_splat(img, rad, flow, imp, alpha=50.0)
    assert np.allclose(out_img[0, 0], (0.5, 0.5, 0.0), atol=1e-15)
    assert out_rad[0, 0] == 3.0
    assert weight[0, 0] == 2.0


def test_splat_sharp_importance_picks_winner():
    img = np.zeros((1, 2, 3))
    img[0, 0] = (1.0, 1.0, 1.0)
    img[0, 1] = (0.0, 0.0, 0.0)
    rad = np.array([[1.0, 5.0]])
    flow = np.zeros((1, 2, 2))
    imp = np.array([[0.4, 0.0]])  # alpha * delta = 20
    out_img, out_rad, _ = softmax_splat(img, rad, flow, imp, alpha=50.0)
    assert np.abs(out_img[0, 0] - 1.0).max() < 1e-8
    assert abs(out_rad[0, 0] - 1.0) < 1e-7


def test_splat_mass_conservation_uniform_importance():
    rng = np.random.default_rng(0)
    h = w = 16
    img = rng.random((h, w, 3))
    rad = rng.uniform(1.0, 2.0, (h, w))
    flow = np.stack(np.meshgrid(np.arange(w), np.arange(h))[::1], axis=-1).astype(float)
    flow = flow[..., :2] * 0  # rebuild cleanly below
    xx, yy = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    flow = np.stack([xx, yy], axis=-1) + rng.uniform(-0.4, 0.4, (h, w, 2))
    flow = np.clip(flow, 0.0, w - 1.001)
    imp = np.full((h, w), 0.7)
    _, _, weight = softmax_splat(img, rad, flow, imp, alpha=3.0)
    assert abs(weight.sum() - h * w) < 1e-6


def test_splat_rejects_nonfinite_flow():
    img = np.zeros((2, 2, 3))
    rad = np.ones((2, 2))
    flow = np.zeros((2, 2, 2))
    flow[0, 0, 0] = np.nan
    with pytest.raises(InputError):
        softmax_splat(img, rad, flow, np.zeros((2, 2)), alpha=1.0)


def test_splat_holes_are_masked_not_errors():
    img = np.ones((2, 2, 3))
    rad = np.ones((2, 2))
    flow = np.zeros((2, 2, 2))  # everything lands on pixel (0, 0)
    _, _, weight = softmax_splat(img, rad, flow, np.zeros((2, 2)), alpha=1.0)
    assert weight[0, 0] > 0.0
    assert weight[1, 1] == 0.0


# ------------------------------------------------------------- pinhole_to_fisheye

def tan_matched_kb(pin: Pinhole, fov_deg=40.0) -> KannalaBrandt:
    """KB whose polynomial reproduces tan(theta): identical mapping to the
    pinhole over a narrow field of view."""
    return KannalaBrandt(pin.fx, pin.fy, pin.cx, pin.cy,
                         1.0 / 3.0, 2.0 / 15.0, 17.0 / 315.0, 62.0 / 2835.0,
                         pin.width, pin.height, fov_deg)


def smooth_view(pin: Pinhole, depth=2.0) -> ViewSample:
    h, w = pin.height, pin.width
    yy, xx = np.mgrid[0:h, 0:w] / max(h - 1, 1)
    image = np.stack([0.5 + 0.4 * np.sin(2 * np.pi * xx),
                      0.5 + 0.4 * np.cos(2 * np.pi * yy),
                      0.5 + 0.3 * np.sin(2 * np.pi * (xx + yy))], axis=-1)
    rays = ray_field(pin)
    radial = depth / rays.dirs[..., 2]
    return ViewSample(image, ScalarMap(radial, rays.mask.copy()), pin, Pose.identity())


def test_pin2fish_near_identity_psnr():
    pin = Pinhole(180.0, 180.0, 32.0, 32.0, 64, 64)  # ~20 deg FoV
    view = smooth_view(pin)
    out, weight = pinhole_to_fisheye(view, tan_matched_kb(pin))
    filled = out.radial.mask
    assert filled.mean() > 0.95
    mse = np.mean((out.image[filled] - view.image[filled]) ** 2)
    psnr = 10.0 * np.log10(1.0 / max(mse, 1e-300))
    assert psnr > 40.0


def fisheye_filling_circle(size, fov_deg, k1) -> KannalaBrandt:
    probe = KannalaBrandt(1.0, 1.0, size / 2.0, size / 2.0, k1, 0.0, 0.0, 0.0,
                          size, size, fov_deg)
    f = (size / 2.0) / probe.r_max
    return KannalaBrandt(f, f, size / 2.0, size / 2.0, k1, 0.0, 0.0, 0.0,
                         size, size, fov_deg)


def erode(mask):
    from scipy.ndimage import binary_erosion
    return binary_erosion(mask)


def test_pin2fish_constant_depth_plane_radial():
    pin = pinhole_fov90(256)
    depth = 2.0
    view = smooth_view(pin, depth=depth)
    target = fisheye_filling_circle(128, 60.0, -0.05)
    out, weight = pinhole_to_fisheye(view, target, alpha=1.0)
    dirs = ray_field(target).dirs
    with np.errstate(divide="ignore"):
        expected = depth / dirs[..., 2]
    # rim pixels get one-sided bilinear support; compare a 1-px-eroded interior
    check = erode(out.radial.mask)
    err = np.abs(out.radial.values - expected)[check]
    assert check.mean() > 0.7
    assert err.max() < 1e-3


def test_pin2fish_world_consistency(box_scene):
    pin = pinhole_fov90(256)
    pose = Pose(rot_y(0.3), (0.2, 0.1, -0.4))
    rendered = render_view(box_scene, pin, pose)
    target = fisheye_filling_circle(96, 70.0, -0.03)
    out, _ = pinhole_to_fisheye(rendered.view, target)
    assert out.pose is rendered.view.pose
    dirs = ray_field(target).dirs
    world = out.pose.apply(dirs * out.radial.values[..., None])
    half = box_scene.size / 2.0
    check = erode(out.radial.mask)
    dist = np.min(np.abs(np.abs(world[check]) - half), axis=1)
    # splatting blends along surfaces; points must land on the box walls
    assert np.quantile(dist, 0.99) < 0.02
    assert dist.max() < 0.05


def test_pin2fish_requires_pinhole_and_overlap():
    view = smooth_view(Pinhole(32.0, 32.0, 32.0, 32.0, 64, 64))
    erp_view = ViewSample(np.zeros((8, 16, 3)),
                          ScalarMap(np.ones((8, 16)), np.ones((8, 16), bool)),
                          Equirectangular(16, 8), Pose.identity())
    with pytest.raises(InputError):
        pinhole_to_fisheye(erp_view, tan_matched_kb(Pinhole(32., 32., 32., 32., 64, 64)))

    # microscopic target FoV whose image circle misses every source ray
    hopeless = KannalaBrandt(100000.0, 100000.0, 32.0, 32.0, 0.0, 0.0, 0.0, 0.0,
                             64, 64, 1.0)
    with pytest.raises(InputError):
        pinhole_to_fisheye(view, hopeless)
