"""Seeded RANSAC: determinism, adaptive termination, outlier rejection."""

import numpy as np
import pytest

from lineloc import (
    Corr2D3D,
    Observation2D,
    PluckerLine,
    PoseSE3,
    RansacConfig,
    ransac,
)
from lineloc.errors import NoModelFound, NotEnoughCorrespondences
from lineloc.geometry import (
    RigCalibration,
    RigCamera,
    random_rotation,
    random_unit_vector,
    rotation_geodesic,
)
from lineloc.robust import adaptive_iterations

FOCAL = 500.0
PIX = 1.0 / FOCAL


def point_scene(rng, n, noise_px=0.0, outlier_ratio=0.0):
    """Central-camera point correspondences; returns (corrs, pose, flags)."""
    R = random_rotation(rng)
    t = rng.uniform(-2.0, 2.0, 3)
    pose = PoseSE3(R, t)
    corrs, flags = [], []
    for _ in range(n):
        z = rng.uniform(2.0, 8.0)
        xc = np.array([rng.uniform(-0.5, 0.5) * z,
                       rng.uniform(-0.5, 0.5) * z, z])
        X = R.T @ (xc - t)
        xy = xc[:2] / z + rng.normal(0.0, noise_px * PIX, 2)
        bad = rng.uniform() < outlier_ratio
        if bad:
            xy = rng.uniform(-0.5, 0.5, 2)
        corrs.append(Corr2D3D(Observation2D(*xy), X))
        flags.append(bad)
    return corrs, pose, np.array(flags)


def line_scene(rng, n, noise_px=0.0, outlier_ratio=0.0):
    R = random_rotation(rng)
    t = rng.uniform(-2.0, 2.0, 3)
    pose = PoseSE3(R, t)
    corrs, flags = [], []
    for _ in range(n):
        z = rng.uniform(2.0, 8.0)
        xc = np.array([rng.uniform(-0.5, 0.5) * z,
                       rng.uniform(-0.5, 0.5) * z, z])
        X = R.T @ (xc - t)
        L = PluckerLine.from_point_direction(X, random_unit_vector(rng))
        xy = xc[:2] / z + rng.normal(0.0, noise_px * PIX, 2)
        bad = rng.uniform() < outlier_ratio
        if bad:
            xy = rng.uniform(-0.5, 0.5, 2)
        corrs.append(Corr2D3D(Observation2D(*xy), L))
        flags.append(bad)
    return corrs, pose, np.array(flags)


def test_config_validation():
    with pytest.raises(ValueError):
        RansacConfig(threshold=0.0)
    with pytest.raises(ValueError):
        RansacConfig(threshold=1.0, confidence=1.0)
    with pytest.raises(ValueError):
        RansacConfig(threshold=1.0, max_iterations=3, min_iterations=5)


def test_adaptive_iteration_formula():
    assert adaptive_iterations(0.99, 0.5, 3) == 35
    assert adaptive_iterations(0.99, 1.0, 3) == 0
    assert adaptive_iterations(0.99, 0.0, 3) == np.inf


def test_all_inlier_set_stops_at_min_iterations():
    corrs, pose, _ = point_scene(np.random.default_rng(11), 40)
    cfg = RansacConfig(threshold=4.0 * PIX, min_iterations=5, seed=1)
    est = ransac("p3p", corrs, config=cfg)
    assert est.iterations_run == 5
    assert est.inlier_ratio == 1.0
    assert rotation_geodesic(est.pose.R, pose.R) < 1e-9
    assert np.linalg.norm(est.pose.t - pose.t) < 1e-9


def test_identical_runs_are_bit_identical():
    corrs, _, _ = point_scene(np.random.default_rng(5), 120,
                              noise_px=1.0, outlier_ratio=0.3)
    cfg = RansacConfig(threshold=4.0 * PIX, seed=9, min_iterations=10)
    a = ransac("p3p", corrs, config=cfg)
    b = ransac("p3p", corrs, config=cfg)
    assert np.array_equal(a.pose.R, b.pose.R)
    assert np.array_equal(a.pose.t, b.pose.t)
    assert np.array_equal(a.inlier_mask, b.inlier_mask)
    assert a.iterations_run == b.iterations_run
    assert a.final_cost == b.final_cost


def test_outlier_rejection_p3p():
    rng = np.random.default_rng(21)
    corrs, pose, flags = point_scene(rng, 200, noise_px=1.0, outlier_ratio=0.3)
    cfg = RansacConfig(threshold=4.0 * PIX, seed=2, min_iterations=10)
    est = ransac("p3p", corrs, config=cfg)
    assert np.degrees(rotation_geodesic(est.pose.R, pose.R)) < 1.0
    assert np.linalg.norm(est.pose.t - pose.t) < 0.1
    # nearly all genuine correspondences are recovered, few outliers admitted
    genuine = ~flags
    assert np.count_nonzero(est.inlier_mask & genuine) > 0.9 * genuine.sum()
    assert np.count_nonzero(est.inlier_mask & flags) <= 0.02 * len(corrs)


def test_outlier_rejection_p4l_u():
    rng = np.random.default_rng(22)
    corrs, pose, flags = line_scene(rng, 150, noise_px=1.0, outlier_ratio=0.3)
    from lineloc import GravityPrior
    g = np.array([0.0, 0.0, -1.0])
    prior = GravityPrior(g, pose.R @ g)
    cfg = RansacConfig(threshold=4.0 * PIX, seed=4, min_iterations=10)
    est = ransac("p4l+u", corrs, gravity=prior, config=cfg)
    assert np.degrees(rotation_geodesic(est.pose.R, pose.R)) < 1.0
    assert est.inlier_ratio > 0.5


def test_inlier_soundness():
    corrs, _, _ = point_scene(np.random.default_rng(31), 100,
                              noise_px=2.0, outlier_ratio=0.2)
    cfg = RansacConfig(threshold=4.0 * PIX, seed=0, min_iterations=5)
    est = ransac("p3p", corrs, config=cfg)
    from lineloc.residuals import ResidualModel
    d = ResidualModel("point", corrs, RigCalibration.single()).distances(est.pose)
    assert np.all(d[est.inlier_mask] <= cfg.threshold)
    assert est.inlier_ratio == est.num_inliers / len(corrs)
    np.testing.assert_allclose(est.final_cost,
                               float(np.sum(d[est.inlier_mask] ** 2)))


def test_rig_problem_through_ransac():
    rng = np.random.default_rng(41)
    R = random_rotation(rng)
    t = rng.uniform(-2.0, 2.0, 3)
    pose = PoseSE3(R, t)
    cams = tuple(RigCamera(PoseSE3(random_rotation(rng),
                                   rng.uniform(-0.3, 0.3, 3)),
                           1.0, 1.0, 0.0, 0.0) for _ in range(2))
    rig = RigCalibration(cams)
    corrs = []
    for i in range(30):
        cam = cams[i % 2]
        zc = rng.uniform(2.0, 8.0)
        xc = np.array([rng.uniform(-0.5, 0.5) * zc,
                       rng.uniform(-0.5, 0.5) * zc, zc])
        X = R.T @ (cam.pose.inverse().apply(xc) - t)
        corrs.append(Corr2D3D(Observation2D(*(xc[:2] / zc)), X, i % 2))
    cfg = RansacConfig(threshold=4.0 * PIX, seed=3, min_iterations=5)
    est = ransac("gpnp", corrs, rig=rig, config=cfg)
    assert rotation_geodesic(est.pose.R, pose.R) < 1e-6
    assert est.inlier_ratio == 1.0


def test_too_few_correspondences():
    corrs, _, _ = point_scene(np.random.default_rng(0), 2)
    cfg = RansacConfig(threshold=1e-3)
    with pytest.raises(NotEnoughCorrespondences):
        ransac("p3p", corrs, config=cfg)


def test_no_model_when_every_sample_is_degenerate():
    # all correspondences share one map point: every minimal sample fails
    corr = Corr2D3D(Observation2D(0.1, 0.2), np.array([0.5, -0.5, 5.0]))
    cfg = RansacConfig(threshold=1e-3, max_iterations=50, seed=0)
    with pytest.raises(NoModelFound):
        ransac("p3p", [corr] * 10, config=cfg)


def test_mixing_targets_raises_type_error():
    corrs, _, _ = point_scene(np.random.default_rng(1), 10)
    stray = Corr2D3D(Observation2D(0.0, 0.0),
                     PluckerLine(np.array([1.0, 0.0, 0.0]),
                                 np.array([0.0, 0.0, 0.0])))
    cfg = RansacConfig(threshold=1e-3)
    with pytest.raises(TypeError):
        ransac("p3p", corrs + [stray], config=cfg)
