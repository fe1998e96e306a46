"""Levenberg-Marquardt refinement: Jacobians, convergence, monotonicity."""

import numpy as np
import pytest

from lineloc import (
    Corr2D3D,
    Corr3D3D,
    Observation2D,
    PluckerLine,
    PoseSE3,
    PoseSim3,
    RefineConfig,
    refine_pose,
)
from lineloc.geometry import (
    RigCalibration,
    random_rotation,
    random_unit_vector,
    rotation_from_axis_angle,
)
from lineloc.residuals import ResidualModel, apply_increment


def central_point_corrs(rng, pose, n):
    corrs = []
    for _ in range(n):
        z = rng.uniform(2.0, 8.0)
        xc = np.array([rng.uniform(-0.5, 0.5) * z,
                       rng.uniform(-0.5, 0.5) * z, z])
        corrs.append(Corr2D3D(Observation2D(*(xc[:2] / z)),
                              pose.inverse().apply(xc)))
    return corrs


def central_line_corrs(rng, pose, n):
    corrs = []
    for _ in range(n):
        z = rng.uniform(2.0, 8.0)
        xc = np.array([rng.uniform(-0.5, 0.5) * z,
                       rng.uniform(-0.5, 0.5) * z, z])
        X = pose.inverse().apply(xc)
        L = PluckerLine.from_point_direction(X, random_unit_vector(rng))
        corrs.append(Corr2D3D(Observation2D(*(xc[:2] / z)), L))
    return corrs


def align_corrs(rng, pose, n, to_lines=False):
    corrs = []
    for _ in range(n):
        Y = rng.uniform(-4.0, 4.0, 3)
        if to_lines:
            target = PluckerLine.from_point_direction(Y, random_unit_vector(rng))
        else:
            target = Y
        corrs.append(Corr3D3D(pose.apply(Y), target))
    return corrs


def make_problem(kind, rng, pose):
    if kind == "point":
        return central_point_corrs(rng, pose, 25), RigCalibration.single()
    if kind == "line":
        return central_line_corrs(rng, pose, 25), RigCalibration.single()
    if kind == "align_point":
        return align_corrs(rng, pose, 25), None
    return align_corrs(rng, pose, 25, to_lines=True), None


def random_pose(rng, kind):
    R = random_rotation(rng)
    t = rng.uniform(-2.0, 2.0, 3)
    if kind.startswith("align") and rng.uniform() < 0.5:
        return PoseSim3(float(rng.uniform(0.5, 2.0)), R, t)
    return PoseSE3(R, t)


def perturbed(pose, rng, angle, shift, dscale=0.0):
    dR = rotation_from_axis_angle(random_unit_vector(rng), angle)
    t = pose.t + shift * random_unit_vector(rng)
    if isinstance(pose, PoseSim3):
        return PoseSim3(pose.scale * np.exp(dscale), dR @ pose.R, t)
    return PoseSE3(dR @ pose.R, t)


@pytest.mark.parametrize("kind", ["point", "line", "align_point", "align_line"])
def test_jacobian_matches_central_differences(kind):
    rng = np.random.default_rng(hash(kind) % 2**32)
    h = 1e-6
    for _ in range(25):
        pose = random_pose(rng, kind)
        corrs, rig = make_problem(kind, rng, pose)
        probe = perturbed(pose, rng, 0.05, 0.05)
        model = ResidualModel(kind, corrs, rig)
        _, J = model.residuals_and_jacobian(probe)
        dim = J.shape[1]
        J_fd = np.zeros_like(J)
        for a in range(dim):
            e = np.zeros(dim)
            e[a] = h
            rp, _ = model.residuals_and_jacobian(apply_increment(probe, e))
            rm, _ = model.residuals_and_jacobian(apply_increment(probe, -e))
            J_fd[:, a] = (rp - rm) / (2.0 * h)
        scale = max(1.0, float(np.max(np.abs(J_fd))))
        assert np.max(np.abs(J - J_fd)) / scale < 1e-4


@pytest.mark.parametrize("kind", ["point", "line", "align_point", "align_line"])
def test_truth_is_a_fixed_point(kind):
    rng = np.random.default_rng(7)
    pose = random_pose(rng, kind)
    corrs, rig = make_problem(kind, rng, pose)
    out = refine_pose(pose, corrs, rig=rig, cost_kind=kind)
    assert not out.diverged
    assert np.max(np.abs(out.pose.R - pose.R)) < 1e-12
    assert np.max(np.abs(out.pose.t - pose.t)) < 1e-12


@pytest.mark.parametrize("kind", ["point", "line", "align_point", "align_line"])
def test_converges_from_nearby_start(kind):
    rng = np.random.default_rng(17)
    for _ in range(5):
        pose = random_pose(rng, kind)
        corrs, rig = make_problem(kind, rng, pose)
        start = perturbed(pose, rng, np.radians(2.0), 0.02 * 8.0, dscale=0.02)
        out = refine_pose(start, corrs, rig=rig, cost_kind=kind)
        # element-wise comparison: the arccos geodesic saturates near 2e-8
        assert np.max(np.abs(out.pose.R - pose.R)) < 1e-8
        assert np.linalg.norm(out.pose.t - pose.t) < 1e-8 * 8.0
        if isinstance(pose, PoseSim3):
            assert abs(out.pose.scale - pose.scale) < 1e-8


def test_basin_invariance_reaches_one_minimum():
    rng = np.random.default_rng(29)
    pose = PoseSE3(random_rotation(rng), rng.uniform(-2.0, 2.0, 3))
    corrs = central_point_corrs(rng, pose, 30)
    rig = RigCalibration.single()
    solutions = []
    for _ in range(6):
        start = perturbed(pose, rng, np.radians(rng.uniform(0.0, 5.0)),
                          0.05 * rng.uniform(0.0, 8.0))
        out = refine_pose(start, corrs, rig=rig, cost_kind="point")
        solutions.append(out.pose)
    for p in solutions[1:]:
        assert np.max(np.abs(p.R - solutions[0].R)) < 1e-8
        assert np.linalg.norm(p.t - solutions[0].t) < 1e-8


def test_cost_nonincreasing_in_iteration_budget():
    rng = np.random.default_rng(37)
    pose = PoseSE3(random_rotation(rng), rng.uniform(-2.0, 2.0, 3))
    corrs = central_point_corrs(rng, pose, 30)
    # mild observation noise so the optimum is not exactly at cost zero
    noisy = [Corr2D3D(Observation2D(c.observation.x + rng.normal(0, 2e-3),
                                    c.observation.y + rng.normal(0, 2e-3)),
                      c.target) for c in corrs]
    start = perturbed(pose, rng, np.radians(3.0), 0.3)
    costs = []
    for budget in range(1, 9):
        out = refine_pose(start, noisy, rig=RigCalibration.single(),
                          cost_kind="point",
                          config=RefineConfig(max_lm_iterations=budget))
        costs.append(out.final_cost)
    assert all(b <= a + 1e-15 for a, b in zip(costs, costs[1:]))


def test_refinement_keeps_the_inlier_mask(monkeypatch):
    from lineloc.robust import PoseEstimate

    rng = np.random.default_rng(43)
    pose = PoseSE3(random_rotation(rng), rng.uniform(-2.0, 2.0, 3))
    corrs = central_point_corrs(rng, pose, 20)
    mask = np.ones(20, dtype=bool)
    mask[[3, 11, 17]] = False
    est = PoseEstimate(perturbed(pose, rng, 0.01, 0.05), mask, 12, 0.85, 1.0)
    out = refine_pose(est, corrs, rig=RigCalibration.single(), cost_kind="point")
    assert np.array_equal(out.inlier_mask, mask)
    assert out.iterations_run == 12


def test_diverged_returns_input_pose(monkeypatch):
    import lineloc.refine as refine_mod

    pose0 = PoseSE3(np.eye(3), np.array([1.0, 2.0, 3.0]))

    class Uphill:
        """Cost is minimal at pose0 but the reported gradient points away,
        so every proposed step increases the cost."""

        def __init__(self, kind, corrs, rig=None):
            pass

        def residuals_and_jacobian(self, pose, mask=None):
            off = np.linalg.norm(pose.t - pose0.t)
            r = np.array([1.0 + off])
            J = np.ones((1, 6))
            return r, J

    monkeypatch.setattr(refine_mod, "ResidualModel", Uphill)
    out = refine_pose(pose0, [None] * 4, cost_kind="point")
    assert out.diverged
    assert np.array_equal(out.pose.R, pose0.R)
    assert np.array_equal(out.pose.t, pose0.t)


def test_unknown_cost_kind():
    with pytest.raises(ValueError):
        refine_pose(PoseSE3.identity(), [], cost_kind="chamfer")
    with pytest.raises(ValueError):
        RefineConfig(max_lm_iterations=0)
