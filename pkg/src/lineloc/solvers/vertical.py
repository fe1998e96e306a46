"""Known-vertical absolute pose from 2 point correspondences (up to 2 poses).

After gravity pre-alignment the rotation is about the canonical vertical.
With q = tan(theta/2), scaling by (1 + q^2) turns the rotation into the
polynomial matrix Rz~(q) and each ray constraint into equations linear in the
scaled translation with coefficients quadratic in q.  Eliminating the
translation against the constant ray-direction matrix leaves one quadratic in
q.  A second solve in the theta+pi chart covers the q -> infinity singularity
(180 degree rotations).
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from ..errors import DegenerateSample
from ..geometry import (
    GravityPrior,
    PoseSE3,
    RigCalibration,
    gravity_prealign,
    rotation_about_z,
)
from .base import (
    Corr2D3D,
    SolutionSet,
    check_distinct_2d3d,
    rays_for,
    verified_solution_set,
)
from .polynomials import quadratic_real_roots


def _rz_poly(q: float) -> np.ndarray:
    """(1 + q^2) * Rz(2 arctan q): polynomial in q, no trig."""
    return np.array([
        [1.0 - q * q, -2.0 * q, 0.0],
        [2.0 * q, 1.0 - q * q, 0.0],
        [0.0, 0.0, 1.0 + q * q],
    ])


def _chart_candidates(X: np.ndarray, origins: np.ndarray, dirs: np.ndarray
                      ) -> Tuple[List[Tuple[float, np.ndarray]], float]:
    """Solve one tan-half-angle chart.

    Returns [(theta, Tz), ...] in the pre-aligned frames plus a conditioning
    indicator (translation design matrix condition number).
    """

    def skew(v):
        return np.array([[0.0, -v[2], v[1]],
                         [v[2], 0.0, -v[0]],
                         [-v[1], v[0], 0.0]])

    D = [skew(d) for d in dirs]
    A = np.vstack(D)                               # (6, 3), constant in q

    sv = np.linalg.svd(A, compute_uv=False)
    if sv[2] < 1e-9 * sv[0]:
        raise DegenerateSample("ray directions are parallel")
    condition = float(sv[0] / sv[2])

    def rhs(q: float) -> np.ndarray:
        return np.concatenate([
            (1.0 + q * q) * (D[i] @ origins[i]) - D[i] @ (_rz_poly(q) @ X[i])
            for i in range(2)
        ])

    b0 = rhs(0.0)
    bp = rhs(1.0)
    bm = rhs(-1.0)
    b1 = 0.5 * (bp - bm)
    b2 = 0.5 * (bp + bm) - b0

    U = np.linalg.svd(A, full_matrices=True)[0]
    N = U[:, 3:]                                   # left null space basis
    C = np.stack([[N[:, k] @ b0, N[:, k] @ b1, N[:, k] @ b2]
                  for k in range(3)])
    Uc, Sc, Vtc = np.linalg.svd(C)
    scale_ref = max(1.0, float(np.abs(X).max()), float(np.abs(origins).max()))
    if Sc[0] < 1e-12 * scale_ref:
        raise DegenerateSample("rotation about the vertical is unconstrained")
    c0, c1, c2 = Vtc[0]

    out = []
    for q in quadratic_real_roots(c0, c1, c2):
        Tp, *_ = np.linalg.lstsq(A, rhs(q), rcond=None)
        Tz = Tp / (1.0 + q * q)
        out.append((2.0 * np.arctan(q), Tz))
    return out, condition


def solve_gpnp_u(corrs: Sequence[Corr2D3D],
                 rig: RigCalibration,
                 gravity: GravityPrior) -> SolutionSet:
    """Rig pose from 2 point correspondences and a known vertical direction.

    Up to 2 poses whose rotation is purely about the gravity axis.  Extra
    correspondences beyond the first two act as a consistency filter.
    """
    corrs = list(corrs)
    if len(corrs) < 2:
        raise DegenerateSample(f"need at least 2 correspondences, got {len(corrs)}")
    if any(c.is_line for c in corrs):
        raise DegenerateSample("point targets required")
    check_distinct_2d3d(corrs[:2], rig)

    Rm, Rq = gravity_prealign(gravity)
    sample = corrs[:2]
    rays = rays_for(sample, rig)
    Xp = np.array([Rm @ c.target for c in sample])
    origins = np.array([Rq @ r.origin for r in rays])
    dirs = np.array([Rq @ r.direction for r in rays])

    poses = []
    condition = 0.0
    flip = rotation_about_z(np.pi)
    for flipped in (False, True):
        Xc = Xp @ flip.T if flipped else Xp
        cands, cond = _chart_candidates(Xc, origins, dirs)
        condition = max(condition, cond)
        for theta, Tz in cands:
            Rz = rotation_about_z(theta + (np.pi if flipped else 0.0))
            R = Rq.T @ Rz @ Rm
            t = Rq.T @ Tz
            poses.append(PoseSE3(R, t))
    return verified_solution_set(poses, corrs, rig, tol=1e-6,
                                 condition=condition)


def solve_p2p_u(corrs: Sequence[Corr2D3D],
                gravity: GravityPrior) -> SolutionSet:
    """Central-camera pose from 2 point correspondences and a known vertical."""
    return solve_gpnp_u(corrs, RigCalibration.single(), gravity)
