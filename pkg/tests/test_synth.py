import numpy as np
import pytest

from wfovgeo import (BoxScene, InputError, Pinhole, Pose, make_trajectory,
                     render_view, rra_rta, ate, rpe)
from wfovgeo.pose import rot_x, rot_y

from conftest import erp, pinhole_fov90


def test_cube_center_face_and_corner_distances(cube_scene):
    # single-pixel pinhole looking straight at a face
    cam = Pinhole(1.0, 1.0, 0.5, 0.5, 1, 1)
    center = Pose.identity()
    assert render_view(cube_scene, cam, center).view.radial.values[0, 0] == 1.0

    # pixel ray along the (1, 1, 1) corner direction
    corner_cam = Pinhole(1.0, 1.0, 0.5, 0.5, 2, 2)
    rendered = render_view(cube_scene, corner_cam, center)
    assert abs(rendered.view.radial.values[1, 1] - np.sqrt(3.0)) < 1e-12

    # full ERP field stays within the cube's geometric bounds
    full = render_view(cube_scene, erp(32), center)
    assert full.view.radial.values.min() >= 1.0 - 1e-12
    assert full.view.radial.values.max() <= np.sqrt(3.0) + 1e-12


def test_pinhole_wall_distances():
    scene = BoxScene((10.0, 10.0, 4.0))
    cam = pinhole_fov90(16)
    rendered = render_view(scene, cam, Pose.identity())  # wall at z = 2
    rays = rendered.view.radial.values
    dirs_z = np.cos(np.arccos(np.clip(rendered.points.points[..., 2] /
                                      np.maximum(rays, 1e-12), -1, 1)))
    # radial = depth / cos(angle off axis): verify against 2 / dir_z
    from wfovgeo import ray_field
    z = ray_field(cam).dirs[..., 2]
    assert np.abs(rays - 2.0 / z).max() < 1e-12
    assert rendered.faces.min() == 4 and rendered.faces.max() == 4


def test_radial_equals_pointmap_norm(box_scene):
    rendered = render_view(box_scene, erp(32), Pose(np.eye(3), (0.3, -0.2, 0.5)))
    norms = np.linalg.norm(rendered.points.points[rendered.points.mask], axis=-1)
    radial = rendered.view.radial.values[rendered.points.mask]
    assert np.abs(norms - radial).max() <= 1e-12


def test_multiview_world_points_on_surface(box_scene):
    poses = [Pose(rot_y(0.4), (0.5, 0.0, -0.5)),
             Pose(rot_x(0.2) @ rot_y(-0.7), (-0.4, 0.3, 0.6))]
    half = box_scene.size / 2.0
    for pose in poses:
        rendered = render_view(box_scene, erp(24), pose)
        world = pose.apply(rendered.points.points[rendered.points.mask])
        dist_to_surface = np.min(np.abs(np.abs(world) - half), axis=1)
        assert dist_to_surface.max() < 1e-9


def test_normals_are_inward_unit_vectors(box_scene):
    pose = Pose(rot_y(0.3), (0.2, 0.1, -0.1))
    rendered = render_view(box_scene, erp(16), pose)
    n = rendered.normals[rendered.normal_mask]
    assert np.abs(np.linalg.norm(n, axis=1) - 1.0).max() < 1e-12
    # inward: the normal opposes the world ray direction component on its axis
    dirs_world = rendered.points.points[rendered.points.mask] @ pose.rotation.T
    n_world = n @ pose.rotation.T
    assert np.all(np.sum(n_world * dirs_world, axis=1) < 0.0)


def test_image_textured_and_in_range(box_scene):
    rendered = render_view(box_scene, erp(16), Pose.identity())
    img = rendered.view.image
    assert img.min() >= 0.0 and img.max() <= 1.0
    assert img.std() > 0.05  # checkerboard + gradient actually varies


def test_pose_outside_box_rejected(box_scene):
    with pytest.raises(InputError):
        render_view(box_scene, erp(8), Pose(np.eye(3), (100.0, 0.0, 0.0)))
    with pytest.raises(InputError):
        BoxScene((2.0, 2.0, 2.0), trajectory=(Pose(np.eye(3), (5.0, 0.0, 0.0)),))


def test_trajectory_line_single_pose(box_scene):
    poses = make_trajectory(box_scene, 1, "line")
    assert len(poses) == 1
    assert np.abs(poses[0].translation).max() == 0.0
    assert np.abs(poses[0].rotation - np.eye(3)).max() == 0.0


def test_trajectory_circle_equal_spacing(box_scene):
    poses = make_trajectory(box_scene, 8, "circle")
    pos = np.array([p.translation for p in poses])
    gaps = np.linalg.norm(np.diff(np.vstack([pos, pos[:1]]), axis=0), axis=1)
    assert np.abs(gaps - gaps[0]).max() < 1e-12


def test_trajectory_random_deterministic(box_scene):
    a = make_trajectory(box_scene, 5, "random", seed=77)
    b = make_trajectory(box_scene, 5, "random", seed=77)
    for pa, pb in zip(a, b):
        assert np.array_equal(pa.matrix(), pb.matrix())
    c = make_trajectory(box_scene, 5, "random", seed=78)
    assert not all(np.array_equal(x.matrix(), y.matrix()) for x, y in zip(a, c))


def test_trajectory_unknown_pattern(box_scene):
    with pytest.raises(InputError):
        make_trajectory(box_scene, 3, "spiral")


def test_rendered_poses_give_perfect_metrics(box_scene):
    poses = make_trajectory(box_scene, 6, "circle")
    rra, rta = rra_rta(poses, poses, 30.0)
    assert (rra, rta) == (100.0, 100.0)
    assert ate(poses, poses) == 0.0
    assert rpe(poses, poses) == (0.0, 0.0)
