"""Shared solver types: correspondences, solution sets, verification."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import BehindCamera, DegenerateProjection, DegenerateSample
from ..geometry import (
    GeneralizedRay,
    Observation2D,
    PluckerLine,
    Pose,
    PoseSE3,
    PoseSim3,
    RigCalibration,
    as_vec3,
)


@dataclass(frozen=True)
class Corr2D3D:
    """A 2D observation matched to a 3D map entity (point or line)."""

    observation: Observation2D
    target: Union[np.ndarray, PluckerLine]
    camera_index: int = 0

    def __post_init__(self):
        if not isinstance(self.target, PluckerLine):
            object.__setattr__(self, "target", as_vec3(self.target))
        object.__setattr__(self, "camera_index", int(self.camera_index))

    @property
    def is_line(self) -> bool:
        return isinstance(self.target, PluckerLine)


@dataclass(frozen=True)
class Corr3D3D:
    """A local 3D point (query/body frame) matched to a map point or line."""

    local_point: np.ndarray
    target: Union[np.ndarray, PluckerLine]

    def __post_init__(self):
        object.__setattr__(self, "local_point", as_vec3(self.local_point))
        if not isinstance(self.target, PluckerLine):
            object.__setattr__(self, "target", as_vec3(self.target))

    @property
    def is_line(self) -> bool:
        return isinstance(self.target, PluckerLine)


def rays_for(corrs: Sequence[Corr2D3D], rig: RigCalibration) -> list:
    return [rig.ray(c.camera_index, c.observation) for c in corrs]


def ray_arrays(corrs: Sequence[Corr2D3D],
               rig: RigCalibration) -> Tuple[np.ndarray, np.ndarray]:
    """Stacked body-frame ray origins and directions, shape (n, 3) each."""
    xbar = np.array([c.observation.xbar for c in corrs])
    dirs = xbar / np.linalg.norm(xbar, axis=1, keepdims=True)
    origins = np.zeros((len(corrs), 3))
    idx = np.array([c.camera_index for c in corrs])
    for k in np.unique(idx):
        cam = rig.cameras[k]
        Rc, tc = cam.pose.R, cam.pose.t
        sel = idx == k
        origins[sel] = -Rc.T @ tc
        dirs[sel] = dirs[sel] @ Rc  # row-wise Rc.T @ d
    return origins, dirs


# ---------------------------------------------------------------------------
# sample-constraint residuals used for in-construction verification


def _line_line_distance(v1, w1, v2, w2) -> float:
    """3D distance between two lines in direction/moment form (unit dirs)."""
    n = np.cross(v1, v2)
    nn = np.linalg.norm(n)
    recip = v1 @ w2 + v2 @ w1
    if nn > 1e-9:
        return abs(recip) / nn
    # (anti)parallel: perpendicular offset between closest points to origin
    o1 = np.cross(v1, w1)
    o2 = np.cross(v2, w2)
    d = o2 - o1
    return float(np.linalg.norm(d - (d @ v1) * v1))


def sample_residual_2d3d(pose: Pose, corr: Corr2D3D, rig: RigCalibration) -> float:
    """Constraint residual of one correspondence under a candidate pose.

    Point targets: reprojection distance of the mapped point against the
    camera ray, in normalized image units.  Line targets: 3D distance between
    the inverse-mapped viewing ray and the target line, in scene units.
    """
    ray = rig.ray(corr.camera_index, corr.observation)
    if corr.is_line:
        Rt = pose.R.T
        c_m = Rt @ (ray.origin - pose.t) / pose.scale
        d_m = Rt @ ray.direction
        return _line_line_distance(d_m, np.cross(c_m, d_m),
                                   corr.target.v, corr.target.w)
    # point target: angle-like residual measured in the camera normalized plane
    Y = pose.apply(corr.target)
    cam = rig.cameras[corr.camera_index]
    Yc = cam.pose.apply(Y)
    if Yc[2] <= 0.0:
        return np.inf
    return float(np.linalg.norm(Yc[:2] / Yc[2] - corr.observation.xy))


def sample_residual_3d3d(pose: Pose, corr: Corr3D3D) -> float:
    """3D residual in scene units: point-point distance or point-to-line
    distance of the inverse-mapped local point."""
    if corr.is_line:
        X_map = pose.R.T @ (corr.local_point - pose.t) / pose.scale
        return corr.target.distance_to(X_map)
    return float(np.linalg.norm(pose.apply(corr.target) - corr.local_point))


def sample_scale_2d3d(corrs: Sequence[Corr2D3D]) -> float:
    """Characteristic scene scale of a sample, for relative tolerances."""
    mags = []
    for c in corrs:
        if c.is_line:
            mags.append(np.linalg.norm(c.target.closest_point_to_origin))
        else:
            mags.append(np.linalg.norm(c.target))
    return max(1.0, max(mags))


def sample_scale_3d3d(corrs: Sequence[Corr3D3D]) -> float:
    mags = [np.linalg.norm(c.local_point) for c in corrs]
    for c in corrs:
        if c.is_line:
            mags.append(np.linalg.norm(c.target.closest_point_to_origin))
        else:
            mags.append(np.linalg.norm(c.target))
    return max(1.0, max(mags))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolutionSet:
    """All real candidate poses of one solver call, with diagnostics.

    `residuals[i]` is the maximum constraint residual of `poses[i]` on the
    generating sample (normalized by the sample scale for 3D residuals).
    `condition` is a solver-specific conditioning indicator (larger = worse).
    """

    poses: Tuple[Pose, ...]
    residuals: Tuple[float, ...]
    condition: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        object.__setattr__(self, "residuals",
                           tuple(float(r) for r in self.residuals))
        if len(self.poses) != len(self.residuals):
            raise ValueError("one residual per pose required")

    def __len__(self) -> int:
        return len(self.poses)

    def __iter__(self):
        return iter(self.poses)

    @property
    def count(self) -> int:
        return len(self.poses)

    @staticmethod
    def empty(condition: float = 0.0) -> "SolutionSet":
        return SolutionSet((), (), condition)


def verified_solution_set(
    poses: Sequence[Pose],
    corrs,
    rig: Optional[RigCalibration] = None,
    tol: float = 1e-6,
    condition: float = 0.0,
    max_count: Optional[int] = None,
    rank_key=None,
) -> SolutionSet:
    """Build a SolutionSet keeping only candidates whose maximum constraint
    residual on the generating sample is below `tol` (relative to the sample
    scale), deduplicated.
    """
    is_2d = len(corrs) > 0 and isinstance(corrs[0], Corr2D3D)
    scale = sample_scale_2d3d(corrs) if is_2d else sample_scale_3d3d(corrs)
    kept = []
    for pose in poses:
        if is_2d:
            res = max(sample_residual_2d3d(pose, c, rig) for c in corrs)
        else:
            res = max(sample_residual_3d3d(pose, c) for c in corrs)
        res_norm = res / scale
        if not np.isfinite(res_norm) or res_norm > tol:
            continue
        if any(_same_pose(pose, p, scale) for p, _ in kept):
            continue
        kept.append((pose, res_norm))
    if rank_key is not None:
        kept.sort(key=lambda pr: rank_key(pr[0]))
    if max_count is not None:
        kept = kept[:max_count]
    return SolutionSet(tuple(p for p, _ in kept),
                       tuple(r for _, r in kept), condition)


def _same_pose(a: Pose, b: Pose, scale: float, rtol: float = 1e-6) -> bool:
    if abs(a.scale - b.scale) > rtol * max(a.scale, b.scale):
        return False
    if np.max(np.abs(a.R - b.R)) > rtol:
        return False
    return bool(np.max(np.abs(a.t - b.t)) <= rtol * scale)


def check_distinct_2d3d(corrs: Sequence[Corr2D3D], rig: RigCalibration) -> None:
    """Reject samples containing (near-)identical correspondences."""
    rays = rays_for(corrs, rig)
    n = len(corrs)
    for i in range(n):
        for j in range(i + 1, n):
            same_ray = (np.allclose(rays[i].origin, rays[j].origin, atol=1e-9)
                        and abs(rays[i].direction @ rays[j].direction) > 1.0 - 1e-12)
            if not same_ray:
                continue
            a, b = corrs[i].target, corrs[j].target
            if isinstance(a, PluckerLine) and isinstance(b, PluckerLine):
                if _line_line_distance(a.v, a.w, b.v, b.w) < 1e-9 \
                        and abs(a.v @ b.v) > 1.0 - 1e-12:
                    raise DegenerateSample(f"correspondences {i} and {j} coincide")
            elif not isinstance(a, PluckerLine) and not isinstance(b, PluckerLine):
                if np.linalg.norm(a - b) < 1e-12:
                    raise DegenerateSample(f"correspondences {i} and {j} coincide")


def ray_depth_at_line(pose: Pose, ray: GeneralizedRay, L: PluckerLine) -> float:
    """Parameter along the oriented query ray at its closest approach to the
    pose-mapped line; positive when the observed feature is in front."""
    vq = pose.R @ L.v
    wq = pose.scale * (pose.R @ L.w) + np.cross(pose.t, vq)
    oq = np.cross(vq, wq)
    n = np.cross(ray.direction, vq)
    nn = float(n @ n)
    if nn < 1e-16:
        return np.inf
    return float(np.cross(oq - ray.origin, vq) @ n / nn)
