"""Synthetic scene generator and the evaluation metrics built on it."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from lineloc.geometry import PoseSE3, PoseSim3, rotation_from_axis_angle
from lineloc.residuals import ResidualModel
from lineloc.synthetic import (
    PoseErrors,
    SceneConfig,
    cumulative_histogram,
    generate_scene,
    look_at,
    pose_errors,
)


def small_config(**kw):
    defaults = dict(num_points=150, num_query_cameras=3, rig_size=3, seed=7)
    defaults.update(kw)
    return SceneConfig(**defaults)


# -- configuration validation ---------------------------------------------


@pytest.mark.parametrize("kw", [
    dict(num_points=0),
    dict(scene_extent=0.0),
    dict(outlier_ratio=1.0),
    dict(outlier_ratio=-0.1),
    dict(pixel_noise_sigma=-1.0),
    dict(focal=0.0),
])
def test_config_rejects_bad_values(kw):
    with pytest.raises(ValueError):
        small_config(**kw)


# -- determinism -----------------------------------------------------------


def test_same_seed_bit_identical():
    a = generate_scene(small_config(pixel_noise_sigma=1.0, outlier_ratio=0.2))
    b = generate_scene(small_config(pixel_noise_sigma=1.0, outlier_ratio=0.2))
    assert np.array_equal(a.points, b.points)
    for la, lb in zip(a.lines, b.lines):
        assert np.array_equal(la.v, lb.v) and np.array_equal(la.w, lb.w)
    ga, gb = a.groups[0], b.groups[0]
    assert np.array_equal(ga.outlier_flags, gb.outlier_flags)
    for ca, cb in zip(ga.corrs_point, gb.corrs_point):
        assert ca.observation.x == cb.observation.x
        assert ca.observation.y == cb.observation.y


def test_different_seed_differs():
    a = generate_scene(small_config(seed=1))
    b = generate_scene(small_config(seed=2))
    assert not np.array_equal(a.points, b.points)


# -- geometry of the generated scene --------------------------------------


def test_look_at_conventions():
    rng = np.random.default_rng(3)
    for _ in range(20):
        position = rng.normal(size=3) * 5.0
        target = rng.normal(size=3)
        pose = look_at(position, target)
        R = pose.R
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) > 0.0
        # the camera sits at the origin of its own frame
        assert np.allclose(pose.apply(position), 0.0, atol=1e-12)
        # the target lands on the optical axis, in front
        tc = pose.apply(target)
        assert abs(tc[0]) < 1e-9 and abs(tc[1]) < 1e-9 and tc[2] > 0.0


def test_observations_inside_frustum():
    inst = generate_scene(small_config(outlier_ratio=0.3,
                                       pixel_noise_sigma=2.0))
    for c in inst.groups[0].corrs_point:
        assert abs(c.observation.x) <= 0.5 + 3 * 2.0 / 500.0
        assert abs(c.observation.y) <= 0.5 + 3 * 2.0 / 500.0


def test_rig_consistency():
    inst = generate_scene(small_config())
    g = inst.groups[0]
    # the body frame is the first member camera
    assert np.allclose(g.rig.cameras[0].pose.R, np.eye(3), atol=1e-12)
    assert np.allclose(g.rig.cameras[0].pose.t, 0.0, atol=1e-12)
    for cam, world in zip(g.rig.cameras, g.camera_poses):
        recomposed = cam.pose.compose(g.body_pose)
        assert np.allclose(recomposed.R, world.R, atol=1e-12)
        assert np.allclose(recomposed.t, world.t, atol=1e-12)


def test_gravity_prior_matches_body_rotation():
    inst = generate_scene(small_config())
    g = inst.groups[0]
    prior = g.gravity()
    assert np.allclose(prior.gravity_map, [0.0, 0.0, -1.0])
    expected = g.body_pose.R @ np.array([0.0, 0.0, -1.0])
    assert np.allclose(prior.gravity_query, expected / np.linalg.norm(expected))


def test_index_alignment_with_scene_points():
    inst = generate_scene(small_config())
    g = inst.groups[0]
    for c, pi in zip(g.corrs_point, g.point_indices):
        assert np.array_equal(c.target, inst.points[pi])
    for c, pi in zip(g.corrs_line, g.point_indices):
        assert np.array_equal(c.target.v, inst.lines[pi].v)


# -- noise and outlier bookkeeping ----------------------------------------


def test_zero_noise_zero_residual_at_truth():
    inst = generate_scene(small_config())
    g = inst.groups[0]
    for kind, corrs in [("point", g.corrs_point), ("line", g.corrs_line),
                        ("align_point", g.corrs_align_point),
                        ("align_line", g.corrs_align_line)]:
        model = ResidualModel(kind, list(corrs), g.rig)
        d = model.distances(g.body_pose)
        assert np.max(d) < 1e-9, kind


def test_exact_outlier_count_and_shared_flags():
    inst = generate_scene(small_config(num_points=400, outlier_ratio=0.25))
    g = inst.groups[0]
    n = len(g.corrs_point)
    assert g.outlier_flags.sum() == round(0.25 * n)
    # genuine observations still fit exactly; replaced ones generally do not
    model = ResidualModel("point", list(g.corrs_point), g.rig)
    d = model.distances(g.body_pose)
    assert np.max(d[~g.outlier_flags]) < 1e-9
    assert np.median(d[g.outlier_flags]) > 1e-3
    # all four flavors share one observation draw
    for cp, cl in zip(g.corrs_point, g.corrs_line):
        assert cp.observation.x == cl.observation.x
        assert cp.camera_index == cl.camera_index


def test_known_structure_depth_matches_truth_when_noiseless():
    inst = generate_scene(small_config())
    g = inst.groups[0]
    for c, cp in zip(g.corrs_align_point, g.corrs_point):
        assert np.allclose(g.body_pose.apply(c.target), c.local_point,
                           atol=1e-9)


def test_depth_noise_perturbs_local_points():
    clean = generate_scene(small_config())
    noisy = generate_scene(small_config(depth_noise_sigma=0.1))
    g0, g1 = clean.groups[0], noisy.groups[0]
    gap = [np.linalg.norm(a.local_point - b.local_point)
           for a, b in zip(g0.corrs_align_point, g1.corrs_align_point)]
    assert np.median(gap) > 1e-3


# -- pose error metric -----------------------------------------------------


def test_pose_errors_identity():
    p = PoseSE3(np.eye(3), np.zeros(3))
    e = pose_errors(p, p)
    assert e.dR_rad == 0.0 and e.dT == 0.0


def test_pose_errors_ten_degrees_about_z():
    R = rotation_from_axis_angle(np.array([0.0, 0.0, 1.0]), np.radians(10.0))
    e = pose_errors(PoseSE3(R, np.zeros(3)), PoseSE3(np.eye(3), np.zeros(3)))
    assert abs(e.dR_deg - 10.0) < 1e-9
    assert e.dT < 1e-12


def test_pose_errors_matches_quaternion_oracle():
    rng = np.random.default_rng(11)
    for _ in range(25):
        Ra = Rotation.random(random_state=np.random.RandomState(
            int(rng.integers(2**31)))).as_matrix()
        Rb = Rotation.random(random_state=np.random.RandomState(
            int(rng.integers(2**31)))).as_matrix()
        e = pose_errors(PoseSE3(Ra, np.zeros(3)), PoseSE3(Rb, np.zeros(3)))
        oracle = (Rotation.from_matrix(Ra) * Rotation.from_matrix(Rb).inv()
                  ).magnitude()
        assert abs(e.dR_rad - oracle) < 1e-9


def test_pose_errors_is_camera_center_distance():
    rng = np.random.default_rng(4)
    R = Rotation.random(random_state=np.random.RandomState(4)).as_matrix()
    center = rng.normal(size=3)
    shifted = center + np.array([0.3, 0.0, 0.0])
    a = PoseSE3(R, -R @ center)
    b = PoseSE3(R, -R @ shifted)
    assert abs(pose_errors(a, b).dT - 0.3) < 1e-12


def test_pose_errors_scale_normalizes_centers():
    R = np.eye(3)
    center = np.array([1.0, 2.0, 3.0])
    sim = PoseSim3(2.0, R, -2.0 * center)   # same camera center, scale 2
    se = PoseSE3(R, -center)
    assert pose_errors(sim, se).dT < 1e-12


# -- recall curves ---------------------------------------------------------


def test_cumulative_histogram_hand_example():
    errors = [PoseErrors(np.radians(1.0), 0.05),
              PoseErrors(np.radians(3.0), 0.20)]
    out = cumulative_histogram(errors, [0.0, 2.0, 5.0])
    assert np.allclose(out["recall_rot"], [0.0, 0.5, 1.0])
    assert np.allclose(out["recall_t"], [0.0, 1.0, 1.0])


def test_cumulative_histogram_boundary_is_inclusive():
    errors = [PoseErrors(np.radians(2.0), 1.0)]
    out = cumulative_histogram(errors, [2.0])
    assert out["recall_rot"][0] == 1.0


def test_cumulative_histogram_empty_raises():
    with pytest.raises(ValueError):
        cumulative_histogram([], [1.0])


def test_cumulative_histogram_sort_count_oracle():
    rng = np.random.default_rng(9)
    errors = [PoseErrors(float(r), float(t))
              for r, t in zip(rng.uniform(0, 0.2, 40), rng.uniform(0, 2, 40))]
    edges = np.linspace(0.0, 12.0, 13)
    out = cumulative_histogram(errors, edges)
    rot = np.sort([e.dR_deg for e in errors])
    for b, rec in zip(edges, out["recall_rot"]):
        assert rec == np.searchsorted(rot, b, side="right") / len(rot)
    assert np.all(np.diff(out["recall_rot"]) >= 0.0)
    assert np.all(np.diff(out["recall_t"]) >= 0.0)
