"""Levenberg-Marquardt pose refinement over the inliers of a robust estimate.

Minimizes the sum of squared residuals for one of the four cost kinds
(2D point reprojection, 2D point-to-projected-line distance, 3D point
alignment, 3D point-to-line alignment).  Rotation is updated through a local
3-parameter tangent increment re-orthonormalized every step; similarity
scale moves on a log parametrization so it stays positive.  Accepted steps
never increase the cost; if the very first iteration cannot accept any step
before the damping cap, the input pose is returned with `diverged` set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .geometry import Pose, RigCalibration
from .residuals import COST_KINDS, ResidualModel, apply_increment
from .robust import PoseEstimate, cost_kind_for, ransac
from .solvers import get_problem

_DAMPING_CAP = 1e12


@dataclass(frozen=True)
class RefineConfig:
    max_lm_iterations: int = 50
    gradient_tolerance: float = 1e-12
    step_tolerance: float = 1e-14
    initial_damping: float = 1e-6

    def __post_init__(self):
        if min(self.gradient_tolerance, self.step_tolerance,
               self.initial_damping) <= 0:
            raise ValueError("tolerances and damping must be positive")
        if self.max_lm_iterations < 1:
            raise ValueError("need at least one iteration")


def refine_pose(pose0: Union[PoseEstimate, Pose],
                corrs: Sequence,
                rig: Optional[RigCalibration] = None,
                cost_kind: str = "point",
                config: RefineConfig = RefineConfig()) -> PoseEstimate:
    """Refine a pose on the inliers recorded in `pose0`.

    A bare pose may be passed instead of a PoseEstimate, in which case every
    correspondence is treated as an inlier.  The inlier mask is kept fixed;
    the returned estimate carries the refined pose, the recomputed cost over
    the same mask, and the divergence flag.
    """
    if cost_kind not in COST_KINDS:
        raise ValueError(f"cost_kind must be one of {COST_KINDS}")
    if isinstance(pose0, PoseEstimate):
        pose = pose0.pose
        mask = np.asarray(pose0.inlier_mask, dtype=bool)
        iterations_run = pose0.iterations_run
    else:
        pose = pose0
        mask = np.ones(len(corrs), dtype=bool)
        iterations_run = 0
    ratio = float(np.count_nonzero(mask)) / max(len(corrs), 1)

    model = ResidualModel(cost_kind, corrs, rig)
    r, J = model.residuals_and_jacobian(pose, mask)
    cost = float(r @ r)
    lam = config.initial_damping
    accepted_any = False

    for _ in range(config.max_lm_iterations):
        g = J.T @ r
        if np.max(np.abs(g)) < config.gradient_tolerance * (1.0 + cost):
            break
        H = J.T @ J
        diag = np.diag(np.maximum(np.diag(H), 1e-12))
        step_accepted = False
        while lam <= _DAMPING_CAP:
            try:
                delta = np.linalg.solve(H + lam * diag, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            pose_try = apply_increment(pose, delta)
            r_try, J_try = model.residuals_and_jacobian(pose_try, mask)
            cost_try = float(r_try @ r_try)
            if np.isfinite(cost_try) and cost_try <= cost:
                pose, r, J, cost = pose_try, r_try, J_try, cost_try
                lam = max(lam / 3.0, 1e-12)
                step_accepted = True
                accepted_any = True
                break
            lam *= 10.0
        if not step_accepted:
            if not accepted_any:
                # could not move at all: report the input pose unchanged
                return PoseEstimate(pose, mask, iterations_run, ratio,
                                    cost, diverged=True)
            break
        if np.linalg.norm(delta) < config.step_tolerance * (
                1.0 + np.linalg.norm(pose.t)):
            break

    return PoseEstimate(pose, mask, iterations_run, ratio, cost,
                        diverged=False)


def estimate_and_refine(problem, corrs, rig=None, gravity=None,
                        ransac_config=None,
                        refine_config: RefineConfig = RefineConfig()
                        ) -> PoseEstimate:
    """RANSAC followed by LM refinement on the winning inlier set."""
    prob = get_problem(problem) if isinstance(problem, str) else problem
    est = ransac(prob, corrs, rig=rig, gravity=gravity, config=ransac_config)
    return refine_pose(est, corrs, rig=rig, cost_kind=cost_kind_for(prob),
                       config=refine_config)
