"""Central absolute pose from 3 point correspondences (up to 4 solutions).

Classical depth-ratio formulation: with s2 = u s1, s3 = v s1 the three
law-of-cosines equations reduce to a quartic in v; depths follow in closed
form and the pose comes from rigid alignment of the back-projected points.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from ..errors import DegenerateSample
from ..geometry import PoseSE3, RigCalibration, normalized
from .alignment import rigid_align
from .base import (
    Corr2D3D,
    SolutionSet,
    check_distinct_2d3d,
    verified_solution_set,
)
from .polynomials import newton_polish, quadratic_real_roots, real_roots


def _depth_system(cosines, sq_dists):
    """Residuals/Jacobian of the three pairwise-distance equations in the
    depths (s1, s2, s3)."""
    (ca, cb, cc) = cosines          # cos(23), cos(13), cos(12)
    (a2, b2, c2) = sq_dists         # |X2-X3|^2, |X1-X3|^2, |X1-X2|^2

    def fun(s):
        s1, s2, s3 = s
        return np.array([
            s2 * s2 + s3 * s3 - 2 * s2 * s3 * ca - a2,
            s1 * s1 + s3 * s3 - 2 * s1 * s3 * cb - b2,
            s1 * s1 + s2 * s2 - 2 * s1 * s2 * cc - c2,
        ])

    def jac(s):
        s1, s2, s3 = s
        return np.array([
            [0.0, 2 * s2 - 2 * s3 * ca, 2 * s3 - 2 * s2 * ca],
            [2 * s1 - 2 * s3 * cb, 0.0, 2 * s3 - 2 * s1 * cb],
            [2 * s1 - 2 * s2 * cc, 2 * s2 - 2 * s1 * cc, 0.0],
        ])

    return fun, jac


def solve_p3p(corrs: Sequence[Corr2D3D],
              rig: RigCalibration = None) -> SolutionSet:
    """All poses consistent with 3 central point correspondences.

    Candidates reproject the three points exactly; solutions with any point
    behind the camera are discarded.  Raises DegenerateSample for collinear
    points or coincident rays.
    """
    corrs = list(corrs)
    if len(corrs) != 3:
        raise DegenerateSample(f"exactly 3 correspondences required, got {len(corrs)}")
    if any(c.is_line for c in corrs):
        raise DegenerateSample("point targets required")
    if rig is None:
        rig = RigCalibration.single()
    check_distinct_2d3d(corrs, rig)

    X = np.array([c.target for c in corrs])
    bearings = np.array([normalized(c.observation.xbar) for c in corrs])
    scale = max(1.0, float(np.abs(X).max()))

    # degenerate configurations
    d = X - X.mean(axis=0)
    if np.linalg.svd(d, compute_uv=False)[1] < 1e-9 * scale:
        raise DegenerateSample("map points are collinear")
    for i in range(3):
        for j in range(i + 1, 3):
            if abs(bearings[i] @ bearings[j]) > 1.0 - 1e-12:
                raise DegenerateSample("observation rays coincide")

    ca = float(bearings[1] @ bearings[2])
    cb = float(bearings[0] @ bearings[2])
    cc = float(bearings[0] @ bearings[1])
    a2 = float(np.sum((X[1] - X[2]) ** 2))
    b2 = float(np.sum((X[0] - X[2]) ** 2))
    c2 = float(np.sum((X[0] - X[1]) ** 2))

    # quartic in v = s3/s1 (lengths normalized by b = |X1 - X3|)
    A2, C2 = a2 / b2, c2 / b2
    q1 = np.array([C2 - 1.0, -2.0 * cb * C2, C2])          # u^2 - 2 cc u - q1 = 0
    q2 = np.array([A2, -2.0 * cb * A2, A2 - 1.0])          # u^2 - 2 ca u v - q2 = 0
    N = P.polysub(q2, q1)
    D = np.array([2.0 * cc, -2.0 * ca])
    quartic = P.polysub(P.polymul(N, N),
                        P.polyadd(2.0 * cc * P.polymul(N, D),
                                  P.polymul(q1, P.polymul(D, D))))

    fun, jac = _depth_system((ca, cb, cc), (a2, b2, c2))
    b_len = np.sqrt(b2)
    poses = []
    for v in real_roots(quartic):
        denom = P.polyval(v, D)
        us = []
        if abs(denom) > 1e-9 * max(1.0, abs(cc), abs(ca) * abs(v)):
            us.append(P.polyval(v, N) / denom)
        else:
            # rays nearly symmetric: fall back to the quadratic in u
            us.extend(quadratic_real_roots(-P.polyval(v, q1), -2.0 * cc, 1.0))
        base = 1.0 + v * v - 2.0 * v * cb
        if base <= 1e-12:
            continue
        s1 = b_len / np.sqrt(base)
        for u in us:
            s = np.array([s1, u * s1, v * s1])
            polished = newton_polish(fun, jac, s,
                                     iters=6, tol=1e-12 * scale * scale)
            if polished is None:
                continue
            s = polished
            if np.any(s <= 0.0):
                continue
            if np.linalg.norm(fun(s)) > 1e-6 * scale * scale:
                continue
            Y = bearings * s[:, None]
            R, t = rigid_align(X, Y)
            poses.append(PoseSE3(R, t))
    return verified_solution_set(poses, corrs, rig, tol=1e-8)
