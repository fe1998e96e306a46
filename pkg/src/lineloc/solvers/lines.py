"""Pose from ray-line incidence: linear 17-pair solver and 4-line + vertical.

Each correspondence of a query ray (origin o, direction d, moment m = o x d)
with a map line (v, w) contributes one incidence equation

    d . (R w) + m . (R v) + T . (R v x d) = 0.

The 17-pair solver treats (R, [T]x R) as 18 linear unknowns and reads the
pose off the null space.  The 4-line solver with known vertical reduces R to
a rotation about z (tan-half-angle q), leaves T linear given q, and
root-finds the determinant eliminant of the 4x4 homogeneous system.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from ..errors import DegenerateSample, RankDeficient
from ..geometry import (
    GravityPrior,
    PluckerLine,
    PoseSE3,
    RigCalibration,
    gravity_prealign,
    rotation_about_z,
    so3_project,
)
from .base import (
    Corr2D3D,
    SolutionSet,
    check_distinct_2d3d,
    ray_depth_at_line,
    ray_arrays,
    rays_for,
    sample_residual_2d3d,
    sample_scale_2d3d,
    verified_solution_set,
)
from .polynomials import det_eliminant_roots, newton_polish


def _require_line_targets(corrs: Sequence[Corr2D3D]) -> None:
    if any(not c.is_line for c in corrs):
        raise DegenerateSample("line targets required")


def _vee(S: np.ndarray) -> np.ndarray:
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def solve_grel_linear(corrs: Sequence[Corr2D3D],
                      rig: RigCalibration) -> SolutionSet:
    """Linear pose from >=17 ray-line incidences (null-space method).

    The incidence equation is linear in the 18 entries of (R, E = [T]x R);
    the one-dimensional null space of the stacked design matrix is split,
    projected to SO(3) and unskewed.  The single least-squares pose is
    returned with its residual reported.
    """
    corrs = list(corrs)
    _require_line_targets(corrs)
    if len(corrs) < 17:
        raise DegenerateSample(f"need at least 17 correspondences, got {len(corrs)}")
    origins, ds = ray_arrays(corrs, rig)

    vs = np.array([c.target.v for c in corrs])
    ws = np.array([c.target.w for c in corrs])
    ms = np.cross(origins, ds)

    # condition the data (Hartley-style): recenter the map on the line
    # anchors and rescale both frames so moments are order one, which keeps
    # the null-space solve stable under observation noise
    anchors = np.cross(vs, ws)
    centroid = anchors.mean(axis=0)
    sigma = max(float(np.sqrt(np.mean(np.sum((anchors - centroid) ** 2,
                                             axis=1)))), 1e-9)
    wn = (ws - np.cross(centroid, vs)) / sigma
    mn = ms / sigma

    block_R = (ds[:, :, None] * wn[:, None, :]
               + mn[:, :, None] * vs[:, None, :]).reshape(-1, 9)
    block_E = (ds[:, :, None] * vs[:, None, :]).reshape(-1, 9)
    rows = np.concatenate([block_R, block_E], axis=1)
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms < 1e-15):
        raise DegenerateSample("degenerate incidence row")
    design = rows / norms[:, None]

    _, sv, Vt = np.linalg.svd(design)
    if sv[16] < 1e-9 * sv[0]:
        raise RankDeficient("incidence design matrix has a degenerate null space")
    y = Vt[-1]
    M_R = y[:9].reshape(3, 3)
    M_E = y[9:].reshape(3, 3)
    if np.linalg.det(M_R) < 0.0:
        M_R, M_E = -M_R, -M_E

    alpha = np.linalg.norm(M_R) / np.sqrt(3.0)
    if alpha < 1e-12:
        raise RankDeficient("rotation block of the null vector vanishes")
    R = so3_project(M_R)
    S = (M_E / alpha) @ R.T
    # undo the conditioning transform
    t = sigma * _vee(0.5 * (S - S.T)) - R @ centroid

    pose = PoseSE3(R, t)
    # vectorized constraint check: 3D distance between each inverse-mapped
    # viewing ray and its target line, relative to the sample extent
    dm = ds @ R
    mm = np.cross((origins - t) @ R, dm)
    recip = np.abs(np.einsum("ij,ij->i", dm, ws) + np.einsum("ij,ij->i", vs, mm))
    nn = np.linalg.norm(np.cross(dm, vs), axis=1)
    diff = anchors - np.cross(dm, mm)
    perp = diff - np.einsum("ij,ij->i", diff, dm)[:, None] * dm
    dists = np.where(nn > 1e-9, recip / np.maximum(nn, 1e-300),
                     np.linalg.norm(perp, axis=1))
    scale = max(1.0, float(np.sqrt(np.max(np.sum(anchors ** 2, axis=1)))))
    return SolutionSet((pose,), (float(dists.max() / scale),),
                       condition=float(sv[0] / max(sv[16], 1e-300)))


# ---------------------------------------------------------------------------
# 4 lines + known vertical


def _rz_poly_batch(q: np.ndarray) -> np.ndarray:
    """(1 + q^2) Rz(2 arctan q) stacked for a vector of q values."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    out = np.zeros((q.size, 3, 3))
    out[:, 0, 0] = 1.0 - q * q
    out[:, 0, 1] = -2.0 * q
    out[:, 1, 0] = 2.0 * q
    out[:, 1, 1] = 1.0 - q * q
    out[:, 2, 2] = 1.0 + q * q
    return out


def _p4l_chart(vs, ws, ds, ms, row_scale) -> List[Tuple[float, np.ndarray]]:
    """One tan-half-angle chart of the 4-line vertical solve.

    Returns (theta, Tz) candidates in the pre-aligned frames.
    """

    def system_rows(q: np.ndarray):
        Rz = _rz_poly_batch(q)                      # (n, 3, 3)
        Rv = np.einsum("nij,cj->nci", Rz, vs)       # (n, 4, 3)
        Rw = np.einsum("nij,cj->nci", Rz, ws)
        A = np.cross(Rv, ds[None, :, :])            # coefficients of Tz
        b = -(np.einsum("ci,nci->nc", ds, Rw)
              + np.einsum("ci,nci->nc", ms, Rv))
        return A, b

    def homogeneous(q: np.ndarray) -> np.ndarray:
        A, b = system_rows(q)
        M = np.concatenate([A, -b[:, :, None]], axis=2)   # (n, 4, 4)
        return M * row_scale[None, :, None]

    roots = det_eliminant_roots(homogeneous, degree=8, halfwidth=8.0,
                                deflate_one_plus_x2=1)

    def fun(x):
        theta, T = x[0], x[1:]
        Rz = rotation_about_z(theta)
        return np.array([
            (np.cross(Rz @ vs[i], ds[i]) @ T
             + ds[i] @ (Rz @ ws[i]) + ms[i] @ (Rz @ vs[i])) * row_scale[i]
            for i in range(4)
        ])

    dRz = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])

    def jac(x):
        theta, T = x[0], x[1:]
        Rz = rotation_about_z(theta)
        Rp = dRz @ Rz
        J = np.zeros((4, 4))
        for i in range(4):
            J[i, 0] = (np.cross(Rp @ vs[i], ds[i]) @ T
                       + ds[i] @ (Rp @ ws[i]) + ms[i] @ (Rp @ vs[i]))
            J[i, 1:] = np.cross(Rz @ vs[i], ds[i])
            J[i] *= row_scale[i]
        return J

    out = []
    for q in roots:
        A, b = system_rows(np.array([q]))
        A, b = A[0] * row_scale[:, None], b[0] * row_scale
        Tz, *_ = np.linalg.lstsq(A, b, rcond=None)
        x = newton_polish(fun, jac, np.concatenate([[2.0 * np.arctan(q)], Tz]),
                          iters=10, tol=1e-13)
        if x is None or not np.all(np.isfinite(x)):
            continue
        if np.linalg.norm(fun(x)) > 1e-7:
            continue
        out.append((x[0], x[1:]))
    return out


def solve_p4l_u(corrs: Sequence[Corr2D3D],
                rig: RigCalibration,
                gravity: GravityPrior) -> SolutionSet:
    """Pose from 4 ray-line pairs and a known vertical (up to 4 poses).

    Both tan-half-angle charts are solved so 180-degree rotations are
    covered.  The determinant eliminant is a sextic, so more than 4
    incidence-consistent candidates can exist; candidates whose observation
    rays would see their line behind the camera are dropped first, and any
    remainder is ranked by how far in front the lines sit, keeping 4.
    """
    corrs = list(corrs)
    _require_line_targets(corrs)
    if len(corrs) < 4:
        raise DegenerateSample(f"need at least 4 correspondences, got {len(corrs)}")
    check_distinct_2d3d(corrs[:4], rig)

    Rm, Rq = gravity_prealign(gravity)
    sample = corrs[:4]
    rays = rays_for(sample, rig)
    vs = np.array([Rm @ c.target.v for c in sample])
    ws = np.array([Rm @ c.target.w for c in sample])
    ds = np.array([Rq @ r.direction for r in rays])
    os_ = np.array([Rq @ r.origin for r in rays])
    ms = np.cross(os_, ds)
    row_scale = np.array([1.0 / max(1.0, np.linalg.norm(ws[i]),
                                    np.linalg.norm(ms[i]))
                          for i in range(4)])

    flip = rotation_about_z(np.pi)
    poses = []
    for flipped in (False, True):
        vsc = vs @ flip.T if flipped else vs
        wsc = ws @ flip.T if flipped else ws
        try:
            cands = _p4l_chart(vsc, wsc, ds, ms, row_scale)
        except ArithmeticError:
            raise DegenerateSample("translation elimination is singular")
        for theta, Tz in cands:
            Rz = rotation_about_z(theta + (np.pi if flipped else 0.0))
            poses.append(PoseSE3(Rq.T @ Rz @ Rm, Rq.T @ Tz))

    all_rays = rays_for(corrs, rig)

    def min_depth(pose) -> float:
        return min(ray_depth_at_line(pose, r, c.target)
                   for r, c in zip(all_rays, corrs))

    scale = sample_scale_2d3d(corrs)
    front = [p for p in poses if min_depth(p) > -1e-9 * scale]
    return verified_solution_set(front, corrs, rig, tol=1e-6,
                                 max_count=4,
                                 rank_key=lambda p: -min_depth(p))
