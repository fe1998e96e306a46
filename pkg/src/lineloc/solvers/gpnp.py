"""Generalized absolute pose: 3 point correspondences on a multi-camera rig.

Core machinery is a trilateration solve: find parameters t_i along three
known rays such that the three points o_i + t_i u_i reproduce the known
pairwise distances of the map points.  The resulting polynomial system has
Bezout bound 8; elimination goes through a resultant in t1, a Sylvester
determinant in t3 (sampled, degree 16) and Newton polishing of every root on
the original distance equations.  The same core serves the 3D-point-to-line
alignment with known scale, where the "rays" are the (unoriented) map lines.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DegenerateSample
from ..geometry import PoseSE3, RigCalibration
from .alignment import rigid_align
from .base import (
    Corr2D3D,
    SolutionSet,
    check_distinct_2d3d,
    rays_for,
    verified_solution_set,
)
from .p3p import solve_p3p
from .polynomials import (
    cheb_nodes,
    fit_power_coeffs,
    newton_polish,
    quadratic_real_roots,
    real_roots,
)


def _mul2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of bivariate coefficient arrays (axis0: t2 powers, axis1: t3)."""
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            if a[i, j] != 0.0:
                out[i:i + b.shape[0], j:j + b.shape[1]] += a[i, j] * b
    return out


def _sub2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = max(a.shape[0], b.shape[0])
    m = max(a.shape[1], b.shape[1])
    out = np.zeros((n, m))
    out[:a.shape[0], :a.shape[1]] += a
    out[:b.shape[0], :b.shape[1]] -= b
    return out


def trilaterate_on_rays(origins: np.ndarray,
                        dirs: np.ndarray,
                        sq_dists: Tuple[float, float, float],
                        require_positive: bool) -> List[np.ndarray]:
    """All real (t1, t2, t3) with |Y_i - Y_j| matching the target distances,
    Y_i = origins[i] + t_i dirs[i].  sq_dists = (d12^2, d13^2, d23^2).

    Lengths are internally normalized so roots are O(1); every candidate is
    Newton-polished on the exact equations and verified.
    """
    d12s, d13s, d23s = sq_dists
    scale = np.sqrt(max(d12s, d13s, d23s,
                        *(np.sum((origins[i] - origins[j]) ** 2)
                          for i in range(3) for j in range(i + 1, 3)), 1e-30))
    o = origins / scale
    dd = (d12s / scale**2, d13s / scale**2, d23s / scale**2)

    g = dirs @ dirs.T
    c12, c13, c23 = o[0] - o[1], o[0] - o[2], o[1] - o[2]

    def pair_coeffs(cij, ui, uj, gij, kij):
        # monic quadratic in t_i: t_i^2 + B(t_j) t_i + C(t_j)
        B = np.array([2.0 * (cij @ ui), -2.0 * gij])        # in t_j
        C = np.array([cij @ cij - kij, -2.0 * (cij @ uj), 1.0])
        return B, C

    B12, C12 = pair_coeffs(c12, dirs[0], dirs[1], g[0, 1], dd[0])  # in t2
    B13, C13 = pair_coeffs(c13, dirs[0], dirs[2], g[0, 2], dd[1])  # in t3
    # E23 as monic quadratic in t3 with coefficients in t2
    B23 = np.array([-2.0 * (c23 @ dirs[2]), -2.0 * g[1, 2]])
    C23 = np.array([c23 @ c23 - dd[2], 2.0 * (c23 @ dirs[1]), 1.0])

    # resultant in t1 of the two monic quadratics, bivariate in (t2, t3):
    # (C12-C13)^2 + (B12-B13)(B12*C13 - B13*C12)
    b12 = B12[:, None]
    c12a = C12[:, None]
    b13 = B13[None, :]
    c13a = C13[None, :]
    dC = _sub2(c12a, c13a)
    dB = _sub2(b12, b13)
    R1 = _sub2(_mul2(dC, dC),
               _mul2(dB, _sub2(_mul2(b13, c12a), _mul2(b12, c13a))))
    # R1 has degree 4 in t3 (axis 1) with unit leading coefficient

    deg3 = R1.shape[1] - 1
    if deg3 < 4:
        pad = np.zeros((R1.shape[0], 5))
        pad[:, :R1.shape[1]] = R1
        R1 = pad

    def sylvester_stack(t2s: np.ndarray) -> np.ndarray:
        n = len(t2s)
        V = np.vander(t2s, R1.shape[0], increasing=True)     # (n, deg_t2+1)
        r = V @ R1                                           # (n, 5) coeffs in t3
        e = np.stack([np.polynomial.polynomial.polyval(t2s, C23),
                      np.polynomial.polynomial.polyval(t2s, B23),
                      np.ones(n)], axis=1)
        S = np.zeros((n, 6, 6))
        for k in range(2):                                   # rows of the quartic
            S[:, k, k:k + 5] = r[:, ::-1]
        for k in range(4):                                   # rows of the quadratic
            S[:, 2 + k, k:k + 3] = e[:, ::-1]
        return S

    xs = cheb_nodes(40, 8.0)
    dets = np.linalg.det(sylvester_stack(xs))
    elim = fit_power_coeffs(xs, dets, 16)

    def fun(t):
        y = o + t[:, None] * dirs
        return np.array([
            np.sum((y[0] - y[1]) ** 2) - dd[0],
            np.sum((y[0] - y[2]) ** 2) - dd[1],
            np.sum((y[1] - y[2]) ** 2) - dd[2],
        ])

    def jac(t):
        y = o + t[:, None] * dirs
        J = np.zeros((3, 3))
        for r, (i, j) in enumerate(((0, 1), (0, 2), (1, 2))):
            diff = y[i] - y[j]
            J[r, i] = 2.0 * diff @ dirs[i]
            J[r, j] = -2.0 * diff @ dirs[j]
        return J

    sols: List[np.ndarray] = []
    for t2 in real_roots(elim, imag_tol=1e-7):
        t3s = quadratic_real_roots(
            np.polynomial.polynomial.polyval(t2, C23),
            np.polynomial.polynomial.polyval(t2, B23), 1.0, imag_tol=1e-6)
        for t3 in t3s:
            b12v = np.polynomial.polynomial.polyval(t2, B12)
            c12v = np.polynomial.polynomial.polyval(t2, C12)
            b13v = np.polynomial.polynomial.polyval(t3, B13)
            c13v = np.polynomial.polynomial.polyval(t3, C13)
            t1s = []
            if abs(b12v - b13v) > 1e-9:
                t1s.append(-(c12v - c13v) / (b12v - b13v))
            else:
                t1s.extend(quadratic_real_roots(c12v, b12v, 1.0, imag_tol=1e-6))
            for t1 in t1s:
                cand = newton_polish(fun, jac, np.array([t1, t2, t3]),
                                     iters=8, tol=1e-14)
                if cand is None or not np.all(np.isfinite(cand)):
                    continue
                if np.linalg.norm(fun(cand)) > 1e-8:
                    continue
                if require_positive and np.any(cand <= 0.0):
                    continue
                if any(np.max(np.abs(cand - s)) < 1e-7 * (1 + np.max(np.abs(s)))
                       for s in sols):
                    continue
                sols.append(cand)
    return [s * scale for s in sols]


def solve_gpnp(corrs: Sequence[Corr2D3D], rig: RigCalibration) -> SolutionSet:
    """Body-frame pose from >=3 rig point correspondences (up to 8 solutions).

    Single-camera central rigs delegate to the central 3-point solver.  With
    more than 3 correspondences the extras act as a consistency filter on the
    minimal-sample candidates.
    """
    corrs = list(corrs)
    if len(corrs) < 3:
        raise DegenerateSample(f"need at least 3 correspondences, got {len(corrs)}")
    if any(c.is_line for c in corrs):
        raise DegenerateSample("point targets required")
    if rig.is_single_central():
        sol = solve_p3p(corrs[:3], rig)
        if len(corrs) == 3:
            return sol
        return verified_solution_set(list(sol), corrs, rig, tol=1e-6)
    check_distinct_2d3d(corrs[:3], rig)

    sample = corrs[:3]
    rays = rays_for(sample, rig)
    X = np.array([c.target for c in sample])
    scale = max(1.0, float(np.abs(X).max()))
    if np.linalg.svd(X - X.mean(axis=0), compute_uv=False)[1] < 1e-9 * scale:
        raise DegenerateSample("map points are collinear")

    origins = np.array([r.origin for r in rays])
    dirs = np.array([r.direction for r in rays])
    sq = (float(np.sum((X[0] - X[1]) ** 2)),
          float(np.sum((X[0] - X[2]) ** 2)),
          float(np.sum((X[1] - X[2]) ** 2)))
    poses = []
    for t in trilaterate_on_rays(origins, dirs, sq, require_positive=True):
        Y = origins + t[:, None] * dirs
        if np.linalg.svd(Y - Y.mean(axis=0), compute_uv=False)[1] < 1e-10 * scale:
            continue  # back-projected points collinear: rotation ambiguous
        R, tr = rigid_align(X, Y)
        poses.append(PoseSE3(R, tr))
    return verified_solution_set(poses, corrs, rig, tol=1e-6)
