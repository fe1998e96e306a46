"""3D-3D point alignment: rigid / similarity / known-vertical variants.

These serve the known-structure localization problems where per-observation
depths give local 3D points, and double as the pose-recovery backend of the
depth-based minimal solvers (3 camera-frame points -> pose).
"""

from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import DegenerateSample
from ..geometry import (
    GravityPrior,
    PoseSE3,
    PoseSim3,
    gravity_prealign,
    rotation_about_z,
    so3_project,
)
from .base import Corr3D3D, SolutionSet, verified_solution_set


def kabsch_rotation(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Proper rotation R minimizing sum |R a_i - b_i|^2 for centered rows."""
    H = A.T @ B
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    return Vt.T @ np.diag([1.0, 1.0, d]) @ U.T


def rigid_align(A: np.ndarray, B: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(R, t) with R @ a_i + t ~= b_i in least squares; reflection excluded."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    ca, cb = A.mean(axis=0), B.mean(axis=0)
    R = kabsch_rotation(A - ca, B - cb)
    return R, cb - R @ ca


def similarity_align(A: np.ndarray, B: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """(s, R, t) with s * R @ a_i + t ~= b_i; scale from the variance ratio."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    ca, cb = A.mean(axis=0), B.mean(axis=0)
    va = float(np.sum((A - ca) ** 2))
    vb = float(np.sum((B - cb) ** 2))
    if va < 1e-24 or vb < 1e-24:
        raise DegenerateSample("alignment points are coincident")
    s = math.sqrt(vb / va)
    R = kabsch_rotation(A - ca, B - cb)
    return s, R, cb - s * (R @ ca)


def vertical_align(A: np.ndarray, B: np.ndarray, scale_known: bool
                   ) -> Tuple[float, np.ndarray, np.ndarray]:
    """Alignment restricted to rotations about the (pre-aligned) vertical.

    Planar Procrustes on the xy components: theta maximizes the planar
    cross-covariance trace; scale from the variance ratio when free.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    ca, cb = A.mean(axis=0), B.mean(axis=0)
    Ac, Bc = A - ca, B - cb
    if scale_known:
        s = 1.0
    else:
        va = float(np.sum(Ac ** 2))
        vb = float(np.sum(Bc ** 2))
        if va < 1e-24 or vb < 1e-24:
            raise DegenerateSample("alignment points are coincident")
        s = math.sqrt(vb / va)
    dot = float(np.sum(Ac[:, 0] * Bc[:, 0] + Ac[:, 1] * Bc[:, 1]))
    crs = float(np.sum(Ac[:, 0] * Bc[:, 1] - Ac[:, 1] * Bc[:, 0]))
    if abs(dot) < 1e-15 and abs(crs) < 1e-15:
        raise DegenerateSample("points carry no azimuthal information")
    theta = math.atan2(crs, dot)
    R = rotation_about_z(theta)
    return s, R, cb - s * (R @ ca)


def _check_spread(P: np.ndarray, need_noncollinear: bool) -> None:
    P = np.asarray(P, dtype=float)
    scale = max(1.0, float(np.abs(P).max()))
    d = P - P.mean(axis=0)
    if np.linalg.norm(d) < 1e-9 * scale:
        raise DegenerateSample("points coincide")
    if need_noncollinear:
        sv = np.linalg.svd(d, compute_uv=False)
        if sv[1] < 1e-9 * max(sv[0], 1e-30):
            raise DegenerateSample("points are collinear")


def solve_point_alignment(corrs: Sequence[Corr3D3D],
                          scale_known: bool = False,
                          gravity: Optional[GravityPrior] = None) -> SolutionSet:
    """Least-squares 3D-3D pose from point-to-point matches.

    Returns the similarity transform mapping map points onto the local points
    (rigid when scale_known).  Minimal sizes: 3 pairs for free rotation, 2
    with a gravity prior.  The single least-squares pose is always returned,
    with its residual reported (inconsistent data keeps a nonzero residual;
    no scale is absorbed in scale_known mode).
    """
    corrs = list(corrs)
    if any(c.is_line for c in corrs):
        raise DegenerateSample("point alignment requires point targets")
    need = 2 if gravity is not None else 3
    if len(corrs) < need:
        raise DegenerateSample(f"need at least {need} pairs, got {len(corrs)}")
    A = np.array([c.target for c in corrs])        # map frame
    B = np.array([c.local_point for c in corrs])   # query frame
    _check_spread(A, need_noncollinear=gravity is None)
    _check_spread(B, need_noncollinear=gravity is None)

    if gravity is None:
        if scale_known:
            R, t = rigid_align(A, B)
            s = 1.0
        else:
            s, R, t = similarity_align(A, B)
    else:
        Rm, Rq = gravity_prealign(gravity)
        s, Rz, tz = vertical_align(A @ Rm.T, B @ Rq.T, scale_known)
        R = Rq.T @ Rz @ Rm
        t = Rq.T @ tz

    pose = PoseSE3(so3_project(R), t) if scale_known else PoseSim3(s, so3_project(R), t)
    res = max(np.linalg.norm(pose.apply(a) - b) for a, b in zip(A, B))
    scale_ref = max(1.0, float(np.abs(B).max()), float(np.abs(A).max()))
    return SolutionSet((pose,), (res / scale_ref,))
