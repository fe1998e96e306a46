"""Seeded deterministic RANSAC over any registered localization problem.

Hypothesis k draws its minimal sample from an independent generator keyed by
(seed, k), so the hypothesis stream does not depend on how many hypotheses
are evaluated concurrently.  Every candidate pose of every minimal sample is
scored against all correspondences; the best model is selected by inlier
count, with ties broken by lower inlier residual sum, then earlier
hypothesis index, then candidate index.  The iteration budget adapts as
N = ceil(log(1-p) / log(1 - w^n)) with w the best inlier ratio so far,
clamped to the configured [min, max] range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    DegenerateSample,
    NoModelFound,
    NotEnoughCorrespondences,
    NumericalFailure,
    RankDeficient,
)
from .geometry import GravityPrior, Pose, RigCalibration
from .residuals import ResidualModel
from .solvers import Problem, get_problem

_SOLVER_ERRORS = (DegenerateSample, RankDeficient, NumericalFailure)


@dataclass(frozen=True)
class RansacConfig:
    threshold: float
    confidence: float = 0.99
    max_iterations: int = 10_000
    min_iterations: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must be in (0, 1)")
        if not self.max_iterations >= self.min_iterations >= 1:
            raise ValueError("need max_iterations >= min_iterations >= 1")


@dataclass
class PoseEstimate:
    """A robust pose with its supporting inliers.

    `final_cost` is the sum of squared inlier residuals; `diverged` is set
    by refinement when no Levenberg-Marquardt step could be accepted.
    """

    pose: Pose
    inlier_mask: np.ndarray
    iterations_run: int
    inlier_ratio: float
    final_cost: float
    diverged: bool = False

    @property
    def num_inliers(self) -> int:
        return int(np.count_nonzero(self.inlier_mask))


def adaptive_iterations(confidence: float, inlier_ratio: float,
                        sample_size: int) -> float:
    """Number of hypotheses needed to draw one all-inlier sample with the
    requested confidence (may be inf while no inlier has been seen)."""
    wn = inlier_ratio ** sample_size
    if wn <= 0.0:
        return math.inf
    if wn >= 1.0:
        return 0.0
    return math.ceil(math.log1p(-confidence) / math.log1p(-wn))


def cost_kind_for(problem: Problem) -> str:
    if problem.corr_type == "2d3d":
        return problem.target
    return "align_point" if problem.target == "point" else "align_line"


def ransac(problem: Union[str, Problem],
           corrs: Sequence,
           rig: Optional[RigCalibration] = None,
           gravity: Optional[GravityPrior] = None,
           config: RansacConfig = None) -> PoseEstimate:
    """Robust pose estimation; deterministic for a fixed (inputs, config).

    Raises NotEnoughCorrespondences when the set is smaller than the minimal
    sample and NoModelFound when no hypothesis gathers even sample-size
    inliers.
    """
    if config is None:
        raise ValueError("a RansacConfig (with a threshold) is required")
    prob = get_problem(problem) if isinstance(problem, str) else problem
    corrs = list(corrs)
    n = prob.sample_size
    N = len(corrs)
    if N < n:
        raise NotEnoughCorrespondences(
            f"{prob.name} needs {n} correspondences, got {N}")
    for c in corrs:
        prob.check_corr(c)
    if prob.corr_type == "2d3d" and rig is None:
        rig = RigCalibration.single()
    model = ResidualModel(cost_kind_for(prob), corrs, rig)

    best_key = None
    best_pose = None
    best_dists = None
    best_count = 0
    k = 0
    budget = float(config.max_iterations)
    while k < min(budget, config.max_iterations) or k < config.min_iterations:
        sample_rng = np.random.default_rng((config.seed, k))
        idx = sample_rng.choice(N, size=n, replace=False)
        try:
            sols = prob.solve([corrs[i] for i in idx], rig, gravity)
        except _SOLVER_ERRORS:
            sols = ()
        for j, pose in enumerate(sols):
            d = model.distances(pose)
            inl = d <= config.threshold
            count = int(np.count_nonzero(inl))
            if count < n:
                continue
            key = (-count, float(d[inl].sum()), k, j)
            if best_key is None or key < best_key:
                best_key = key
                best_pose = pose
                best_dists = d
                best_count = count
                budget = max(config.min_iterations,
                             adaptive_iterations(config.confidence,
                                                 count / N, n))
        k += 1

    if best_pose is None:
        raise NoModelFound(
            f"no hypothesis reached {n} inliers in {k} iterations")
    mask = best_dists <= config.threshold
    return PoseEstimate(pose=best_pose,
                        inlier_mask=mask,
                        iterations_run=k,
                        inlier_ratio=best_count / N,
                        final_cost=float(np.sum(best_dists[mask] ** 2)),
                        diverged=False)
