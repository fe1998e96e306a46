"""Minimal 6-line incidence solver (homotopy continuation, up to 64 poses)."""

import numpy as np
import pytest

from lineloc import Observation2D, RigCalibration
from lineloc.errors import DegenerateSample
from lineloc.geometry import random_rotation, rotation_from_axis_angle
from lineloc.solvers.base import Corr2D3D
from lineloc.solvers.p6l import solve_p6l_minimal

from test_solvers_lines import line_corrs
from test_solvers_points import contains_pose, two_camera_rig


def test_p6l_recovers_pose_central():
    rng = np.random.default_rng(80)
    rig = RigCalibration.single()
    for _ in range(6):
        R = random_rotation(rng)
        t = rng.uniform(-2, 2, 3)
        sol = solve_p6l_minimal(line_corrs(rng, rig, R, t, [0] * 6), rig)
        assert 1 <= len(sol) <= 64
        assert contains_pose(sol, R, t, rtol=1e-5, t_atol=1e-5)
        # every returned pose satisfies all six incidences
        assert np.all(np.asarray(sol.residuals) < 1e-6)


def test_p6l_recovers_pose_rig():
    rng = np.random.default_rng(81)
    rig = two_camera_rig()
    for _ in range(4):
        R = random_rotation(rng)
        t = rng.uniform(-2, 2, 3)
        corrs = line_corrs(rng, rig, R, t, [0, 1, 0, 1, 0, 1])
        sol = solve_p6l_minimal(corrs, rig)
        assert contains_pose(sol, R, t, rtol=1e-5, t_atol=1e-5)


def test_p6l_half_turn_rotation():
    # 180-degree rotations sit at the Cayley chart's pole; the solver must
    # still find them (it retries under a fixed prerotation)
    rng = np.random.default_rng(82)
    rig = RigCalibration.single()
    axis = np.array([0.0, 1.0, 0.0])
    R = rotation_from_axis_angle(axis, np.pi)
    t = np.array([0.3, -0.2, 0.5])
    sol = solve_p6l_minimal(line_corrs(rng, rig, R, t, [0] * 6), rig)
    assert contains_pose(sol, R, t, rtol=1e-5, t_atol=1e-5)


def test_p6l_extra_pairs_filter_candidates():
    rng = np.random.default_rng(83)
    rig = RigCalibration.single()
    R = random_rotation(rng)
    t = rng.uniform(-2, 2, 3)
    sol6 = solve_p6l_minimal(line_corrs(rng, rig, R, t, [0] * 6), rig)
    corrs9 = line_corrs(rng, rig, R, t, [0] * 9)
    sol9 = solve_p6l_minimal(corrs9, rig)
    # three extra incidences prune the spurious branches down to the truth
    assert len(sol9) <= len(sol6)
    assert len(sol9) == 1
    assert contains_pose(sol9, R, t, rtol=1e-5, t_atol=1e-5)


def test_p6l_duplicate_correspondence_rejected():
    rng = np.random.default_rng(84)
    rig = RigCalibration.single()
    corrs = line_corrs(rng, rig, np.eye(3), np.zeros(3), [0] * 6)
    corrs[3] = corrs[0]
    with pytest.raises(DegenerateSample):
        solve_p6l_minimal(corrs, rig)


def test_p6l_rejects_short_samples_and_point_targets():
    rng = np.random.default_rng(85)
    rig = RigCalibration.single()
    corrs = line_corrs(rng, rig, np.eye(3), np.zeros(3), [0] * 6)
    with pytest.raises(DegenerateSample):
        solve_p6l_minimal(corrs[:5], rig)
    bad = list(corrs)
    bad[2] = Corr2D3D(Observation2D(0.1, 0.2), np.array([1.0, 2.0, 3.0]))
    with pytest.raises(DegenerateSample):
        solve_p6l_minimal(bad, rig)
