"""Core geometry: lifting, projection, residuals, gravity alignment.

The derived checks use independent oracles (golden-section minimization,
sample-and-project, quaternion geodesics from scipy) rather than the closed
forms under test.
"""

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from scipy.spatial.transform import Rotation as ScipyRotation
from scipy.stats import chi2

from lineloc import (
    CANONICAL_VERTICAL,
    GeneralizedRay,
    GravityPrior,
    Observation2D,
    PluckerLine,
    PoseSE3,
    PoseSim3,
    RigCalibration,
    RigCamera,
    gravity_prealign,
    lift_point,
    line_point_at,
    point_line_residual,
    point_point_residual,
    project_line,
    project_point,
    ray_line_incidence,
)
from lineloc.errors import BehindCamera, DegenerateLine, DegenerateProjection
from lineloc.geometry import (
    plane_basis,
    random_rotation,
    rotation_about_z,
    rotation_between,
    rotation_geodesic,
    rotation_to_vertical,
    unit3,
)


def random_pose(rng, t_scale=2.0):
    return PoseSE3(random_rotation(rng), t_scale * rng.standard_normal(3))


def oracle_line_distance(L, X):
    """Distance from X to the line by golden-section search over the line
    parameter -- no closed-form distance formula involved."""
    o = np.cross(L.v, L.w)
    res = minimize_scalar(lambda a: np.linalg.norm(o + a * L.v - X),
                          bracket=(-100.0, 0.0, 100.0), method="golden",
                          options={"xtol": 1e-14})
    return res.fun


# ---------------------------------------------------------------------------
# Plucker lines and lifting


def test_lift_forced_direction_examples():
    # w = X x v for a hand-picked direction
    L = PluckerLine.from_point_direction([1.0, 2.0, 3.0], [0.0, 0.0, 1.0])
    assert np.allclose(L.w, [2.0, -1.0, 0.0])
    # the origin lifts to a line through the origin (zero moment)
    L0 = PluckerLine.from_point_direction([0.0, 0.0, 0.0], [0.3, -0.4, 0.5])
    assert np.allclose(L0.w, 0.0)


def test_lift_incidence_against_golden_section_oracle():
    rng = np.random.default_rng(42)
    for _ in range(50):
        X = rng.uniform(-5, 5, 3)
        L = lift_point(X, rng)
        assert oracle_line_distance(L, X) < 1e-12
        assert L.distance_to(X) < 1e-10


def test_plucker_invariants_random():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        L = lift_point(rng.uniform(-10, 10, 3), rng)
        assert abs(np.linalg.norm(L.v) - 1.0) < 1e-12
        assert abs(L.v @ L.w) < 1e-10 * max(1.0, np.linalg.norm(L.w))


def test_plucker_rejects_bad_inputs():
    with pytest.raises(ValueError):
        PluckerLine([0.0, 0.0, 2.0], [0.0, 0.0, 0.0])  # not unit
    with pytest.raises(ValueError):
        PluckerLine([0.0, 0.0, 1.0], [0.0, 1.0, 1.0])  # moment not orthogonal


def test_line_point_at_examples():
    L = PluckerLine([0.0, 0.0, 1.0], [0.0, -1.0, 0.0])
    assert np.allclose(line_point_at(L, 0.0), [1.0, 0.0, 0.0])
    assert np.allclose(line_point_at(L, 3.0), [1.0, 0.0, 3.0])


def test_line_point_at_recovers_lifted_point():
    rng = np.random.default_rng(3)
    for _ in range(20):
        X = rng.uniform(-5, 5, 3)
        L = lift_point(X, rng)
        res = minimize_scalar(lambda a: np.linalg.norm(line_point_at(L, a) - X),
                              bracket=(-100.0, 0.0, 100.0), method="golden",
                              options={"xtol": 1e-14})
        assert res.fun < 1e-10


def test_lifted_direction_uniformity_chi_square():
    # 64 equal-area bins: 8 slices in z times 8 azimuth sectors
    rng = np.random.default_rng(2024)
    n = 100_000
    dirs = np.array([lift_point(np.zeros(3), rng).v for _ in range(n)])
    zbin = np.clip(((dirs[:, 2] + 1.0) / 2.0 * 8).astype(int), 0, 7)
    abin = np.clip(((np.arctan2(dirs[:, 1], dirs[:, 0]) + math.pi)
                    / (2 * math.pi) * 8).astype(int), 0, 7)
    counts = np.bincount(zbin * 8 + abin, minlength=64)
    expected = n / 64.0
    stat = np.sum((counts - expected) ** 2 / expected)
    assert stat < chi2.ppf(1.0 - 0.001, 63)


def test_line_transform_consistency():
    # transformed line must contain the transformed points of the original
    rng = np.random.default_rng(11)
    for _ in range(30):
        X = rng.uniform(-4, 4, 3)
        L = lift_point(X, rng)
        pose = PoseSim3(float(rng.uniform(0.5, 2.0)), random_rotation(rng),
                        rng.standard_normal(3))
        Lq = L.transformed(pose)
        for a in (-2.0, 0.0, 1.7):
            assert Lq.distance_to(pose.apply(L.point_at(a))) < 1e-9


# ---------------------------------------------------------------------------
# projection


def test_project_line_identity_example():
    L = PluckerLine([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])  # through (0,0,1), dir x
    l = project_line(PoseSE3.identity(), L)
    l = l / np.linalg.norm(l)
    assert np.allclose(np.abs(l), [0.0, 1.0, 0.0], atol=1e-12)
    x = project_point(PoseSE3.identity(), [0.0, 0.0, 1.0])
    assert abs(np.array([x[0], x[1], 1.0]) @ l) < 1e-12


def test_project_line_through_center_degenerate():
    L = PluckerLine.from_point_direction([0.0, 0.0, 0.0], [0.1, 0.2, 1.0])
    with pytest.raises(DegenerateProjection):
        project_line(PoseSE3.identity(), L)


def test_project_line_sample_and_project_oracle():
    rng = np.random.default_rng(5)
    done = 0
    while done < 40:
        pose = random_pose(rng)
        L = lift_point(rng.uniform(-3, 3, 3), rng)
        try:
            l = project_line(pose, L)
        except DegenerateProjection:
            continue
        ln = l / np.linalg.norm(l)
        hits = 0
        for a in np.linspace(-4, 4, 10):
            Y = line_point_at(L, a)
            try:
                y = project_point(pose, Y)
            except BehindCamera:
                continue
            assert abs(np.array([y[0], y[1], 1.0]) @ ln) < 1e-9 * (1 + np.linalg.norm(y))
            hits += 1
        if hits:
            done += 1


def test_point_residual_examples():
    P = PoseSE3.identity()
    assert point_point_residual(Observation2D(0.0, 0.0), P, [0, 0, 1]) == 0.0
    assert abs(point_point_residual(Observation2D(0.1, 0.0), P, [0, 0, 1]) - 0.1) < 1e-15
    with pytest.raises(BehindCamera):
        point_point_residual(Observation2D(0.0, 0.0), P, [0, 0, -1])


def test_point_line_residual_examples():
    assert point_line_residual(Observation2D(0.0, 0.0), [0.0, 1.0, 0.0]) == 0.0
    assert abs(point_line_residual(Observation2D(0.0, 1.0), [0.0, 1.0, 0.0]) - 1.0) < 1e-15
    with pytest.raises(DegenerateLine):
        point_line_residual(Observation2D(1.0, 1.0), [0.0, 0.0, 1.0])


def test_residuals_vanish_on_consistent_instance():
    rng = np.random.default_rng(17)
    done = 0
    while done < 50:
        pose = random_pose(rng)
        X = rng.uniform(-3, 3, 3)
        try:
            x = project_point(pose, X)
        except BehindCamera:
            continue
        obs = Observation2D(x[0], x[1])
        assert point_point_residual(obs, pose, X) < 1e-10
        L = lift_point(X, rng)
        try:
            l = project_line(pose, L)
        except DegenerateProjection:
            continue
        assert abs(point_line_residual(obs, l)) < 1e-10
        done += 1


def test_residual_dominance():
    # |signed distance to the projected line| <= reprojection distance, since
    # the projected point lies on the projected line
    rng = np.random.default_rng(23)
    done = 0
    while done < 500:
        pose = random_pose(rng)
        X = rng.uniform(-3, 3, 3)
        L = lift_point(X, rng)
        obs = Observation2D(*rng.uniform(-1, 1, 2))
        try:
            rpp = point_point_residual(obs, pose, X)
            rpl = point_line_residual(obs, project_line(pose, L))
        except (BehindCamera, DegenerateProjection):
            continue
        assert abs(rpl) <= rpp + 1e-12
        done += 1


# ---------------------------------------------------------------------------
# generalized rays


def test_ray_line_incidence_at_truth():
    rng = np.random.default_rng(31)
    done = 0
    while done < 50:
        pose = random_pose(rng)
        X = rng.uniform(-3, 3, 3)
        Xc = pose.apply(X)
        if Xc[2] < 0.1:
            continue
        ray = GeneralizedRay.central(Xc)
        L = lift_point(X, rng)
        assert abs(ray_line_incidence(pose, ray, L)) < 1e-10
        # perturbed pose: generically nonzero
        bad = PoseSE3(pose.R, pose.t + np.array([0.1, 0.02, -0.07]))
        assert abs(ray_line_incidence(bad, ray, L)) > 1e-6
        done += 1


def test_ray_line_incidence_self_incidence():
    # a map line equal to the mapped ray line gives exactly zero
    rng = np.random.default_rng(37)
    pose = random_pose(rng)
    ray = GeneralizedRay(rng.standard_normal(3), unit3(rng.standard_normal(3)))
    inv = pose.inverse()
    om = inv.apply(ray.origin)
    dm = inv.R @ ray.direction
    L = PluckerLine.from_point_direction(om, dm)
    assert abs(ray_line_incidence(pose, ray, L)) < 1e-12


def test_incidence_equals_scaled_line_residual_for_central_rays():
    # for a central ray toward xbar: incidence * |xbar| == xbar . l exactly
    rng = np.random.default_rng(41)
    done = 0
    while done < 1000:
        pose = random_pose(rng)
        L = lift_point(rng.uniform(-3, 3, 3), rng)
        xbar = np.array([*rng.uniform(-1, 1, 2), 1.0])
        ray = GeneralizedRay.central(xbar)
        try:
            l = project_line(pose, L)
        except DegenerateProjection:
            continue
        inc = ray_line_incidence(pose, ray, L)
        assert abs(inc * np.linalg.norm(xbar) - xbar @ l) < 1e-9 * (1 + abs(xbar @ l))
        done += 1


def test_rig_ray_roundtrip():
    rng = np.random.default_rng(43)
    cam_pose = random_pose(rng)
    cam = RigCamera(cam_pose, 500.0, 480.0, 320.0, 240.0)
    rig = RigCalibration((cam,))
    X_body = rng.uniform(-2, 2, 3)
    Xc = cam_pose.apply(X_body)
    if Xc[2] <= 0:
        X_body = cam_pose.inverse().apply(np.abs(Xc))
        Xc = cam_pose.apply(X_body)
    obs = Observation2D(*(Xc[:2] / Xc[2]))
    ray = rig.ray(0, obs)
    # the body-frame ray passes through the body-frame point
    assert ray.line().distance_to(X_body) < 1e-9
    # and originates at the camera center
    assert np.allclose(ray.origin, cam_pose.center)


# ---------------------------------------------------------------------------
# poses


def test_pose_group_laws():
    rng = np.random.default_rng(53)
    for _ in range(100):
        a = random_pose(rng)
        b = random_pose(rng)
        X = rng.standard_normal(3)
        ab = a.compose(b)
        assert np.allclose(ab.apply(X), a.apply(b.apply(X)), atol=1e-9)
        ident = a.compose(a.inverse())
        assert np.allclose(ident.R, np.eye(3), atol=1e-9)
        assert np.allclose(ident.t, 0.0, atol=1e-9)


def test_sim3_group_laws_and_se3_reduction():
    rng = np.random.default_rng(59)
    for _ in range(100):
        a = PoseSim3(float(rng.uniform(0.2, 5.0)), random_rotation(rng), rng.standard_normal(3))
        b = PoseSim3(float(rng.uniform(0.2, 5.0)), random_rotation(rng), rng.standard_normal(3))
        X = rng.standard_normal(3)
        assert np.allclose(a.compose(b).apply(X), a.apply(b.apply(X)), atol=1e-9)
        inv = a.compose(a.inverse())
        assert abs(inv.s - 1.0) < 1e-9
        assert np.allclose(inv.apply(X), X, atol=1e-9)
    se3 = PoseSE3(random_rotation(rng), rng.standard_normal(3))
    sim = se3.to_sim3()
    assert np.allclose(sim.apply(X), se3.apply(X), atol=1e-15)
    with pytest.raises(ValueError):
        PoseSim3(2.0, np.eye(3), np.zeros(3)).to_se3()


def test_rotation_geodesic_matches_quaternion_oracle():
    rng = np.random.default_rng(61)
    for _ in range(100):
        Ra, Rb = random_rotation(rng), random_rotation(rng)
        qa = ScipyRotation.from_matrix(Ra)
        qb = ScipyRotation.from_matrix(Rb)
        oracle = (qa.inv() * qb).magnitude()
        assert abs(rotation_geodesic(Ra, Rb) - oracle) < 1e-10


# ---------------------------------------------------------------------------
# gravity


def test_gravity_prealign_examples():
    R = rotation_to_vertical(CANONICAL_VERTICAL)
    assert np.allclose(R, np.eye(3), atol=1e-15)
    R = rotation_to_vertical([1.0, 0.0, 0.0])
    assert np.allclose(R @ np.array([1.0, 0.0, 0.0]), CANONICAL_VERTICAL, atol=1e-12)
    # antipodal case: fixed 180 degrees about x
    R = rotation_to_vertical([0.0, 0.0, 1.0])
    assert np.allclose(R, np.diag([1.0, -1.0, -1.0]), atol=1e-15)


def test_gravity_prealign_random_apply_and_check():
    rng = np.random.default_rng(67)
    for _ in range(200):
        g = unit3(rng.standard_normal(3))
        assert np.allclose(rotation_to_vertical(g) @ g, CANONICAL_VERTICAL, atol=1e-12)


def test_gravity_prealign_reduces_rotation_to_vertical_axis():
    # build a truth whose relative rotation maps map-gravity onto query-gravity;
    # after pre-alignment the residual rotation must be about (0,0,-1)
    rng = np.random.default_rng(71)
    for _ in range(50):
        g_map = unit3(rng.standard_normal(3))
        R_truth_q = random_rotation(rng)  # arbitrary query attitude
        g_query = R_truth_q @ g_map
        prior = GravityPrior(g_map, g_query)
        Rm, Rq = gravity_prealign(prior)
        resid = Rq @ R_truth_q @ Rm.T
        # a rotation fixing the z axis has zeros in the off-axis entries
        assert abs(resid[2, 2] - 1.0) < 1e-10
        assert np.max(np.abs([resid[0, 2], resid[1, 2], resid[2, 0], resid[2, 1]])) < 1e-10


def test_rotation_between_edge_cases():
    rng = np.random.default_rng(73)
    a = unit3(rng.standard_normal(3))
    assert np.allclose(rotation_between(a, a), np.eye(3), atol=1e-12)
    R = rotation_between(a, -a)
    assert np.allclose(R @ a, -a, atol=1e-12)
    assert abs(np.linalg.det(R) - 1.0) < 1e-12


def test_plane_basis_is_orthonormal_right_handed():
    rng = np.random.default_rng(79)
    for _ in range(100):
        n = unit3(rng.standard_normal(3))
        e1, e2 = plane_basis(n)
        G = np.array([e1, e2, n])
        assert np.allclose(G @ G.T, np.eye(3), atol=1e-12)
        assert np.allclose(np.cross(e1, e2), n, atol=1e-12)


def test_rotation_about_z_matches_axis_angle():
    rng = np.random.default_rng(83)
    for _ in range(20):
        th = float(rng.uniform(-math.pi, math.pi))
        oracle = ScipyRotation.from_rotvec([0, 0, th]).as_matrix()
        assert np.allclose(rotation_about_z(th), oracle, atol=1e-12)
