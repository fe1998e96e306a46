"""Aligning local 3D points onto obfuscated 3D map lines.

Each local point (from per-observation depth) corresponds to an unknown
point o_i + alpha_i v_i on its map line; the similarity/rigid transform and
the line parameters are recovered jointly.  Pairwise point distances remove
the translation (and rotation), leaving small polynomial systems in the
line parameters:

  * known scale, free rotation (3 pairs): trilateration along the lines,
    up to 8 solutions;
  * unknown scale, free rotation (4 pairs): scale ratios give 4 quadrics in
    the 4 line parameters, solved by continuation from a frozen generic
    start (16 paths);
  * known vertical, unknown scale (3 pairs): vertical components are linear
    in (s, s*alpha); the two remaining planar norms form two conics whose
    resultant is a quartic;
  * known vertical, known scale (2 pairs): one linear + one quadratic
    equation, up to 2 solutions.

Every candidate must place all local points on their lines within 1e-8
(relative point-to-line distance) to be returned.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DegenerateSample, NumericalFailure
from ..geometry import (
    GravityPrior,
    PoseSE3,
    PoseSim3,
    gravity_prealign,
    rotation_about_z,
)
from .alignment import rigid_align, similarity_align, vertical_align
from .base import (
    Corr3D3D,
    SolutionSet,
    sample_residual_3d3d,
    sample_scale_3d3d,
    verified_solution_set,
)
from .gpnp import trilaterate_on_rays
from .homotopy import FAILED, parameter_homotopy, real_endpoints
from .polynomials import (
    cheb_nodes,
    fit_power_coeffs,
    newton_polish,
    quadratic_real_roots,
    real_roots,
)

VERIFY_TOL = 1e-8


# ---------------------------------------------------------------------------
# quadric continuation (unknown scale, free rotation)


def pack_quadrics(A: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Pack 4 quadrics x^T A_k x + b_k . x + c_k (A_k symmetric 4x4)."""
    return np.concatenate([np.asarray(A).ravel(),
                           np.asarray(b).ravel(),
                           np.asarray(c).ravel()])


def unpack_quadrics(p: np.ndarray):
    return p[:64].reshape(4, 4, 4), p[64:80].reshape(4, 4), p[80:84]


def quadric_system(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    A, b, c = unpack_quadrics(p)
    return (np.einsum("pi,kij,pj->pk", x, A, x)
            + np.einsum("ki,pi->pk", b, x) + c[None, :])


def quadric_jacobian(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    A, b, _ = unpack_quadrics(p)
    return 2.0 * np.einsum("kij,pj->pki", A, x) + b[None, :, :]


@lru_cache(maxsize=1)
def _quadric_start_data() -> Tuple[np.ndarray, np.ndarray]:
    raw = json.loads(resources.files("lineloc").joinpath(
        "_data/quadric_start.json").read_text())
    p0 = np.array(raw["params_re"]) + 1j * np.array(raw["params_im"])
    starts = np.array(raw["starts_re"]) + 1j * np.array(raw["starts_im"])
    return p0, starts


def _pair_norm_quadric(n: int, i: int, j: int, bvec: np.ndarray,
                       vi: np.ndarray, vj: np.ndarray):
    """Coefficients of ||bvec + a_i v_i - a_j v_j||^2 over alpha in R^n."""
    A = np.zeros((n, n))
    bb = np.zeros(n)
    A[i, i] += 1.0
    A[j, j] += 1.0
    A[i, j] -= vi @ vj
    A[j, i] -= vi @ vj
    bb[i] = 2.0 * (bvec @ vi)
    bb[j] = -2.0 * (bvec @ vj)
    return A, bb, float(bvec @ bvec)


# ---------------------------------------------------------------------------
# mode implementations (each returns a list of candidate poses)


def _extract(sample: Sequence[Corr3D3D]):
    o = np.array([c.target.closest_point_to_origin for c in sample])
    v = np.array([c.target.v for c in sample])
    X = np.array([c.local_point for c in sample])
    return o, v, X


def _pairwise_sq(X: np.ndarray) -> np.ndarray:
    d = X[:, None, :] - X[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


def _spread_ok(Y: np.ndarray) -> bool:
    scale = max(1.0, float(np.abs(Y).max()))
    sv = np.linalg.svd(Y - Y.mean(axis=0), compute_uv=False)
    return sv[1] > 1e-9 * scale


def _mode_known_scale_free(sample) -> List[PoseSE3]:
    o, v, X = _extract(sample)
    D = _pairwise_sq(X)
    poses = []
    for a in trilaterate_on_rays(o, v, (D[0, 1], D[0, 2], D[1, 2]),
                                 require_positive=False):
        Y = o + a[:, None] * v
        if not _spread_ok(Y):
            continue
        R, t = rigid_align(Y, X)
        poses.append(PoseSE3(R, t))
    return poses


def _mode_unknown_scale_free(sample) -> List[PoseSim3]:
    o, v, X = _extract(sample)
    D = _pairwise_sq(X)
    scale = max(1.0, float(np.abs(o).max()), float(np.abs(X).max()))

    pair_q = {}
    for i in range(4):
        for j in range(i + 1, 4):
            pair_q[(i, j)] = _pair_norm_quadric(4, i, j, o[i] - o[j], v[i], v[j])

    A = np.zeros((4, 4, 4))
    bb = np.zeros((4, 4))
    cc = np.zeros(4)
    ref = pair_q[(0, 1)]
    for k, (i, j) in enumerate(((0, 2), (0, 3), (1, 2), (1, 3))):
        q = pair_q[(i, j)]
        A[k] = D[0, 1] * q[0] - D[i, j] * ref[0]
        bb[k] = D[0, 1] * q[1] - D[i, j] * ref[1]
        cc[k] = D[0, 1] * q[2] - D[i, j] * ref[2]
    norm = max(1.0, float(np.abs(A).max()), float(np.abs(bb).max()),
               float(np.abs(cc).max()))
    p1 = pack_quadrics(A / norm, bb / norm, cc / norm)

    p0, starts = _quadric_start_data()
    result = parameter_homotopy(quadric_system, quadric_jacobian,
                                p0, p1, starts)
    if np.mean(result.status == FAILED) > 0.5:
        raise NumericalFailure("quadric path tracking collapsed")

    def eval_pair(alpha, i, j):
        Aq, bq, cq = pair_q[(i, j)]
        return float(alpha @ Aq @ alpha + bq @ alpha + cq)

    poses = []
    for alpha in real_endpoints(result):
        x = alpha[None].astype(complex)
        for _ in range(6):
            F = quadric_system(x, p1)
            try:
                x = x - np.linalg.solve(quadric_jacobian(x, p1), F[..., None])[..., 0]
            except np.linalg.LinAlgError:
                break
        alpha = x[0].real
        if not np.all(np.isfinite(alpha)):
            continue
        rho = eval_pair(alpha, 0, 1) / D[0, 1]
        if rho <= 1e-12:
            continue
        # the pair (2,3) was not used in the square system: consistency
        # filter, relative so that noisy-but-genuine samples still pass
        mismatch = abs(eval_pair(alpha, 2, 3) - rho * D[2, 3])
        if mismatch > 0.05 * rho * D[2, 3] + 1e-6 * scale * scale:
            continue
        Y = o + alpha[:, None] * v
        if not _spread_ok(Y):
            continue
        try:
            s, R, t = similarity_align(Y, X)
        except DegenerateSample:
            continue
        poses.append(PoseSim3(s, R, t))
    return poses


def _mode_vertical_unknown_scale(sample, gravity) -> List[PoseSim3]:
    Rm, Rq = gravity_prealign(gravity)
    o, v, X = _extract(sample)
    o = o @ Rm.T
    v = v @ Rm.T
    Xp = X @ Rq.T
    scale = max(1.0, float(np.abs(o).max()), float(np.abs(Xp).max()))

    # unknowns u = (s, beta1, beta2, beta3) with beta = s * alpha;
    # vertical components are rotation-invariant and linear in u
    pairs = ((0, 1), (0, 2))
    L = np.zeros((2, 4))
    r = np.zeros(2)
    G = []       # planar coefficient matrices: P_k = G_k @ u
    dxy = []
    for row, (i, j) in enumerate(pairs):
        b = o[i] - o[j]
        L[row, 0] = b[2]
        L[row, 1 + i] += v[i][2]
        L[row, 1 + j] -= v[j][2]
        delta = Xp[i] - Xp[j]
        r[row] = delta[2]
        Gk = np.zeros((2, 4))
        Gk[:, 0] = b[:2]
        Gk[:, 1 + i] += v[i][:2]
        Gk[:, 1 + j] -= v[j][:2]
        G.append(Gk)
        dxy.append(delta[:2])

    U, sv, Vt = np.linalg.svd(L)
    if sv[1] < 1e-12 * max(sv[0], 1.0):
        raise DegenerateSample("vertical structure is rank deficient")
    u_p, *_ = np.linalg.lstsq(L, r, rcond=None)
    N = Vt[2:].T                                   # (4, 2) null basis

    conics = []
    for Gk, dk in zip(G, dxy):
        M = Gk @ N                                 # (2, 2)
        w0 = Gk @ u_p
        Ac = M.T @ M
        bc = 2.0 * (M.T @ w0)
        cc = float(w0 @ w0 - dk @ dk)
        conics.append((Ac, bc, cc))

    def coeffs_in_y1(k, y2):
        Ac, bc, cc = conics[k]
        a = Ac[0, 0]
        b = 2.0 * Ac[0, 1] * y2 + bc[0]
        c = Ac[1, 1] * y2 * y2 + bc[1] * y2 + cc
        return a, b, c

    def resultant(y2s):
        vals = []
        for y2 in np.atleast_1d(y2s):
            a1, b1, c1 = coeffs_in_y1(0, y2)
            a2, b2, c2 = coeffs_in_y1(1, y2)
            vals.append((a1 * c2 - a2 * c1) ** 2
                        - (a1 * b2 - a2 * b1) * (b1 * c2 - b2 * c1))
        return np.array(vals)

    halfwidth = 8.0 * scale
    xs = cheb_nodes(11, halfwidth)
    elim = fit_power_coeffs(xs, resultant(xs), 4)

    def conic_fun(y):
        out = np.zeros(2)
        for k, (Ac, bc, cc) in enumerate(conics):
            out[k] = y @ Ac @ y + bc @ y + cc
        return out

    def conic_jac(y):
        return np.array([2.0 * (Ac @ y) + bc for Ac, bc, _ in conics])

    poses = []
    for y2 in real_roots(elim, imag_tol=1e-7):
        a1, b1, c1 = coeffs_in_y1(0, y2)
        a2, b2, c2 = coeffs_in_y1(1, y2)
        denom = a2 * b1 - a1 * b2
        y1s = []
        if abs(denom) > 1e-10 * max(1.0, abs(a1), abs(a2)):
            y1s.append((a1 * c2 - a2 * c1) / denom)
        else:
            y1s.extend(quadratic_real_roots(c1, b1, a1, imag_tol=1e-6))
        for y1 in y1s:
            y = newton_polish(conic_fun, conic_jac, np.array([y1, y2]),
                              iters=8, tol=1e-14)
            if y is None or np.linalg.norm(conic_fun(y)) > 1e-7 * scale * scale:
                continue
            u = u_p + N @ y
            s = u[0]
            if s <= 1e-9:
                continue
            alpha = u[1:] / s
            Y = o + alpha[:, None] * v
            try:
                s2, Rz, tz = vertical_align(Y, Xp, scale_known=False)
            except DegenerateSample:
                continue
            poses.append(PoseSim3(s2, Rq.T @ Rz @ Rm, Rq.T @ tz))
    return poses


def _mode_vertical_known_scale(sample, gravity) -> List[PoseSE3]:
    Rm, Rq = gravity_prealign(gravity)
    o, v, X = _extract(sample)
    o = o @ Rm.T
    v = v @ Rm.T
    Xp = X @ Rq.T
    scale = max(1.0, float(np.abs(o).max()), float(np.abs(Xp).max()))

    b = o[0] - o[1]
    delta = Xp[0] - Xp[1]
    cl = np.array([v[0][2], -v[1][2]])
    rhs = delta[2] - b[2]
    if np.linalg.norm(cl) < 1e-12:
        if abs(rhs) > 1e-9 * scale:
            return []                     # vertically inconsistent: no pose
        raise DegenerateSample("both lines are horizontal: offset family")
    alpha_p = cl * rhs / (cl @ cl)
    n = np.array([v[1][2], v[0][2]])
    n /= np.linalg.norm(n)

    base = b + alpha_p[0] * v[0] - alpha_p[1] * v[1]
    dirv = n[0] * v[0] - n[1] * v[1]
    c2 = float(dirv @ dirv)
    c1 = 2.0 * float(base @ dirv)
    c0 = float(base @ base - delta @ delta)
    if c2 < 1e-14 and abs(c1) < 1e-12 * scale:
        if abs(c0) < 1e-9 * scale * scale:
            raise DegenerateSample("parallel lines leave a sliding family")
        return []

    poses = []
    skipped_azimuth = 0
    for y in quadratic_real_roots(c0, c1, c2):
        alpha = alpha_p + y * n
        Y = o + alpha[:, None] * v
        u_map = (Y[0] - Y[1])[:2]
        u_q = delta[:2]
        if np.linalg.norm(u_map) < 1e-9 * scale or np.linalg.norm(u_q) < 1e-9 * scale:
            skipped_azimuth += 1
            continue
        theta = np.arctan2(u_map[0] * u_q[1] - u_map[1] * u_q[0], u_map @ u_q)
        Rz = rotation_about_z(theta)
        tz = Xp[0] - Rz @ Y[0]
        poses.append(PoseSE3(Rq.T @ Rz @ Rm, Rq.T @ tz))
    if not poses and skipped_azimuth:
        raise DegenerateSample("displacement is vertical: azimuth undetermined")
    return poses


# ---------------------------------------------------------------------------


def solve_point_to_line_alignment(corrs: Sequence[Corr3D3D],
                                  scale_known: bool = False,
                                  gravity: Optional[GravityPrior] = None
                                  ) -> SolutionSet:
    """All transforms placing local 3D points onto their map lines.

    Modes and minimal sizes: free rotation needs 3 pairs with known scale
    (up to 8 candidates) or 4 with unknown scale; a known vertical lowers
    that to 3 (unknown scale) or 2 (known scale, up to 2 candidates).
    Point targets are rejected -- this family is strictly line-based.
    """
    corrs = list(corrs)
    if any(not c.is_line for c in corrs):
        raise DegenerateSample("line targets required (point targets rejected)")
    if gravity is None:
        need = 3 if scale_known else 4
    else:
        need = 2 if scale_known else 3
    if len(corrs) < need:
        raise DegenerateSample(f"need at least {need} pairs, got {len(corrs)}")
    sample = corrs[:need]
    X = np.array([c.local_point for c in sample])
    D = _pairwise_sq(X)
    scale = max(1.0, float(np.abs(X).max()))
    if np.min(D[~np.eye(len(sample), dtype=bool)]) < (1e-9 * scale) ** 2:
        raise DegenerateSample("local points coincide")

    if gravity is None and scale_known:
        poses = _mode_known_scale_free(sample)
        cap, overdetermined = 8, False
    elif gravity is None:
        poses = _mode_unknown_scale_free(sample)
        cap, overdetermined = None, True
    elif scale_known:
        poses = _mode_vertical_known_scale(sample, gravity)
        cap, overdetermined = 2, False
    else:
        poses = _mode_vertical_unknown_scale(sample, gravity)
        cap, overdetermined = 4, True

    tol = VERIFY_TOL
    if overdetermined and poses:
        # these modes have one more constraint than degrees of freedom, so a
        # noisy sample admits no exact fit; verify against a multiple of the
        # best achievable residual (noiseless samples keep the strict bound)
        sscale = sample_scale_3d3d(sample)
        best = min(max(sample_residual_3d3d(p, c) for c in sample)
                   for p in poses) / sscale
        tol = max(VERIFY_TOL, 3.0 * best)
    return verified_solution_set(poses, corrs, tol=tol, max_count=cap)
