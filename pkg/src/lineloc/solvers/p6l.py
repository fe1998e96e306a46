"""Minimal pose from 6 ray-line incidences (up to 64 solutions).

Rotation in the Cayley chart: R = C(s) / (1 + s.s) with
C(s) = (1 - s.s) I + 2 [s]x + 2 s s^T.  Each incidence equation, multiplied
through by (1 + s.s), becomes a polynomial of degree 3 in (s, T); six of them
form a square system whose generic root count (64) was established once by a
total-degree bootstrap on frozen generic complex data.  At runtime the 64
frozen start solutions are continued along the parameter segment to the
actual correspondences.

The chart misses 180-degree rotations (s at infinity); whenever a path is
lost, the solve retries under fixed prerotations whose axes jointly cover
every such blind spot.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import Sequence, Tuple

import numpy as np

from ..errors import DegenerateSample, NumericalFailure
from ..geometry import PoseSE3, RigCalibration, rotation_from_axis_angle, so3_project
from .base import (
    Corr2D3D,
    SolutionSet,
    check_distinct_2d3d,
    rays_for,
    verified_solution_set,
)
from .homotopy import FAILED, OK, _newton_delta, real_endpoints, track_paths

_I3 = np.eye(3)


def _skew_batch(s: np.ndarray) -> np.ndarray:
    out = np.zeros(s.shape[:-1] + (3, 3), dtype=s.dtype)
    out[..., 0, 1] = -s[..., 2]
    out[..., 0, 2] = s[..., 1]
    out[..., 1, 0] = s[..., 2]
    out[..., 1, 2] = -s[..., 0]
    out[..., 2, 0] = -s[..., 1]
    out[..., 2, 1] = s[..., 0]
    return out


def cayley_numerator(s: np.ndarray) -> np.ndarray:
    """C(s) = (1 - s.s) I + 2 [s]x + 2 s s^T, batched; R = C / (1 + s.s)."""
    ss = np.einsum("...i,...i->...", s, s)
    return ((1.0 - ss)[..., None, None] * _I3.astype(s.dtype)
            + 2.0 * _skew_batch(s)
            + 2.0 * s[..., :, None] * s[..., None, :])


def pack_params(v: np.ndarray, w: np.ndarray,
                d: np.ndarray, m: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(a).ravel() for a in (v, w, d, m)])


def unpack_params(p: np.ndarray) -> Tuple[np.ndarray, ...]:
    return tuple(p[18 * k:18 * (k + 1)].reshape(6, 3) for k in range(4))


def _cross_last(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product over the last axis (broadcasting, no np.cross overhead)."""
    return np.stack([a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
                     a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
                     a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]], axis=-1)


def _basis_cross(v: np.ndarray) -> np.ndarray:
    """(6, 3, 3) array of e_k x v_i over correspondences i and axes k."""
    out = np.zeros((v.shape[0], 3, 3), dtype=v.dtype)
    out[:, 0, 1] = -v[:, 2]
    out[:, 0, 2] = v[:, 1]
    out[:, 1, 0] = v[:, 2]
    out[:, 1, 2] = -v[:, 0]
    out[:, 2, 0] = -v[:, 1]
    out[:, 2, 1] = v[:, 0]
    return out


def incidence_system(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """F(x, p) for x = (s, T) stacked (P, 6); one row per correspondence."""
    v, w, d, m = unpack_params(p)
    s, T = x[:, :3], x[:, 3:]
    C = cayley_numerator(s)
    Cv = np.matmul(v[None], np.swapaxes(C, 1, 2))      # (P, 6, 3)
    Cw = np.matmul(w[None], np.swapaxes(C, 1, 2))
    cr = _cross_last(Cv, d[None])
    return ((cr * T[:, None, :]).sum(-1)
            + (Cw * d[None]).sum(-1) + (Cv * m[None]).sum(-1))


def incidence_jacobian(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    v, w, d, m = unpack_params(p)
    s, T = x[:, :3], x[:, 3:]
    P = x.shape[0]
    J = np.empty((P, 6, 6), dtype=x.dtype)
    C = cayley_numerator(s)
    Cv = np.matmul(v[None], np.swapaxes(C, 1, 2))
    J[:, :, 3:] = _cross_last(Cv, d[None])

    # dC_k a = -2 s_k a + 2 e_k x a + 2 e_k (s.a) + 2 s a_k, vectorized
    # over the axis index k -> arrays indexed (path, corr, k, component)
    def dC_apply(a, Ecross):
        sa = a[None] @ s[:, :, None]                   # (P, 6, 1): s . a_i
        term = (-2.0 * s[:, None, :, None] * a[None, :, None, :]
                + 2.0 * Ecross[None])
        term += 2.0 * sa[:, :, :, None] * _I3.astype(x.dtype)[None, None]
        term += 2.0 * s[:, None, None, :] * a[None, :, :, None]
        return term

    dCv = dC_apply(v, _basis_cross(v))                 # (P, 6, k, a)
    dCw = dC_apply(w, _basis_cross(w))
    crk = _cross_last(dCv, d[None, :, None, :])
    J[:, :, :3] = ((crk * T[:, None, None, :]).sum(-1)
                   + (dCw * d[None, :, None, :]).sum(-1)
                   + (dCv * m[None, :, None, :]).sum(-1))
    return J


# Runtime evaluation uses a condensed form of the same system: with q(s) the
# ten monomials of degree <= 2 in the Cayley vector, each incidence row is
# q(s)^T A_i [1; T] for a (10, 4) coefficient block A_i built from the
# correspondence data.  Along the straight parameter segment the blocks are
# quadratic in t, so three samples of the tensor determine the whole path and
# every H/J evaluation collapses to a few small matmuls.

_MONO_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def _monomials(s: np.ndarray) -> np.ndarray:
    """[1, s1, s2, s3, s1^2, s1 s2, s1 s3, s2^2, s2 s3, s3^2], batched."""
    q = np.empty((s.shape[0], 10), dtype=s.dtype)
    q[:, 0] = 1.0
    q[:, 1:4] = s
    for col, (a, b) in enumerate(_MONO_PAIRS, start=4):
        q[:, col] = s[:, a] * s[:, b]
    return q


def _dmonomials(s: np.ndarray) -> np.ndarray:
    """d q / d s as a (P, 10, 3) array."""
    dq = np.zeros((s.shape[0], 10, 3), dtype=s.dtype)
    dq[:, 1, 0] = dq[:, 2, 1] = dq[:, 3, 2] = 1.0
    for row, (a, b) in enumerate(_MONO_PAIRS, start=4):
        dq[:, row, a] += s[:, b]
        dq[:, row, b] += s[:, a]
    return dq


def _quadratic_expand(a: np.ndarray) -> np.ndarray:
    """Coefficients of C(s) a over the monomial basis, shape (10, n, 3)."""
    zeros = np.zeros_like(a[:, 0])
    E = np.zeros((10,) + a.shape, dtype=a.dtype)
    E[0] = a
    E[1] = 2.0 * np.stack([zeros, -a[:, 2], a[:, 1]], axis=1)
    E[2] = 2.0 * np.stack([a[:, 2], zeros, -a[:, 0]], axis=1)
    E[3] = 2.0 * np.stack([-a[:, 1], a[:, 0], zeros], axis=1)
    for row, (j, k) in enumerate(_MONO_PAIRS, start=4):
        if j == k:
            E[row] = -a
            E[row][:, j] += 2.0 * a[:, j]
        else:
            E[row][:, j] = 2.0 * a[:, k]
            E[row][:, k] = 2.0 * a[:, j]
    return E


def coeff_tensor(p: np.ndarray) -> np.ndarray:
    """(n, 10, 4) blocks A_i with F_i(s, T) = q(s)^T A_i [1; T]."""
    v, w, d, m = unpack_params(p)
    cv = _quadratic_expand(v)
    cw = _quadratic_expand(w)
    A = np.empty((v.shape[0], 10, 4), dtype=p.dtype)
    A[:, :, 0] = (np.einsum("qic,ic->iq", cw, d)
                  + np.einsum("qic,ic->iq", cv, m))
    A[:, :, 1:] = np.transpose(_cross_last(cv, d[None]), (1, 0, 2))
    return A


def _tensor_system(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    P = x.shape[0]
    q = _monomials(x[:, :3])
    Tb = np.concatenate([np.ones((P, 1), dtype=x.dtype), x[:, 3:]], axis=1)
    W = (Tb @ A.transpose(2, 0, 1).reshape(4, -1)).reshape(P, -1, 10)
    return np.matmul(W, q[:, :, None])[..., 0]


def _tensor_jacobian(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    P = x.shape[0]
    s = x[:, :3]
    q = _monomials(s)
    Tb = np.concatenate([np.ones((P, 1), dtype=x.dtype), x[:, 3:]], axis=1)
    W = (Tb @ A.transpose(2, 0, 1).reshape(4, -1)).reshape(P, -1, 10)
    J = np.empty((P, A.shape[0], 6), dtype=x.dtype)
    J[:, :, :3] = np.matmul(W, _dmonomials(s))
    J[:, :, 3:] = (q @ A[:, :, 1:].transpose(1, 0, 2).reshape(10, -1)
                   ).reshape(P, -1, 3)
    return J


@lru_cache(maxsize=1)
def _start_data() -> Tuple[np.ndarray, np.ndarray]:
    raw = json.loads(resources.files("lineloc").joinpath(
        "_data/p6l_start.json").read_text())
    p0 = np.array(raw["params_re"]) + 1j * np.array(raw["params_im"])
    starts = np.array(raw["starts_re"]) + 1j * np.array(raw["starts_im"])
    return p0, starts


# The Cayley chart cannot represent 180-degree rotations; a solution there
# sends its path to infinity.  Retrying under a fixed prerotation R0 moves
# the blind spot, but a half-turn about an axis perpendicular to R0's axis
# is still a half-turn after composing.  Three quarter-turn prerotations
# about non-coplanar axes therefore cover every rotation: an axis cannot be
# perpendicular to all three.  The first one covers the common axis-aligned
# half-turns.
_PREROTATIONS = tuple(
    rotation_from_axis_angle(np.array(axis) / np.linalg.norm(axis), 0.5 * np.pi)
    for axis in ([1.0, 1.0, 1.0], [1.0, -1.0, 0.0], [1.0, 1.0, -2.0]))


def _solve_chart(v, w, d, m, sigma) -> Tuple[list, bool, bool]:
    """Track the 64 paths for one Cayley chart.

    Returns (poses, complete, collapsed): `complete` means every path ended
    cleanly, so no solution escaped through the chart's blind spot.
    """
    p0, starts = _start_data()
    p1 = pack_params(v, w / sigma, d, m / sigma).astype(complex)
    # the coefficient tensor is quadratic along the segment, so three samples
    # pin down A(t) and each tracker callback is a couple of matmuls
    A_ends = [coeff_tensor((1.0 - t) * p0 + t * p1) for t in (0.0, 0.5, 1.0)]
    A2 = 2.0 * (A_ends[2] + A_ends[0] - 2.0 * A_ends[1])
    A1 = A_ends[2] - A_ends[0] - A2
    A0 = A_ends[0]

    def H(x, t):
        return _tensor_system(A0 + t * (A1 + t * A2), x)

    def J(x, t):
        return _tensor_jacobian(A0 + t * (A1 + t * A2), x)

    # loose tracking tolerance: the endgame plus the Newton polish below
    # recover full precision, and every candidate is re-verified.  The extra
    # corrector iterations let the tracker keep a larger step through the
    # handful of tight spots on the segment
    result = track_paths(H, J, starts, corrector_tol=1e-6, dt_max=0.2,
                         corrector_iters=5)
    complete = bool(np.all(result.status == OK))
    collapsed = bool(np.mean(result.status == FAILED) > 0.5)

    poses = []
    X = real_endpoints(result)
    if len(X):
        # sharpen on the real system, all roots at once
        A_target = A_ends[2].real
        for _ in range(6):
            F = _tensor_system(A_target, X)
            Jm = _tensor_jacobian(A_target, X)
            delta = _newton_delta(Jm, F)
            X = np.where(np.isfinite(delta).all(axis=1)[:, None], X + delta, X)
    for xr in X:
        if not np.all(np.isfinite(xr)):
            continue
        s, T = xr[:3], xr[3:]
        denom = 1.0 + s @ s
        R = so3_project(cayley_numerator(s[None])[0].real / denom)
        poses.append(PoseSE3(R, sigma * T))
    return poses, complete, collapsed


def solve_p6l_minimal(corrs: Sequence[Corr2D3D],
                      rig: RigCalibration) -> SolutionSet:
    """All poses consistent with 6 ray-line incidences (up to 64).

    Raises DegenerateSample on duplicated correspondences and
    NumericalFailure when continuation loses the majority of its paths.  An
    empty set on data admitting no real pose is a valid outcome.
    """
    corrs = list(corrs)
    if any(not c.is_line for c in corrs):
        raise DegenerateSample("line targets required")
    if len(corrs) < 6:
        raise DegenerateSample(f"need at least 6 correspondences, got {len(corrs)}")
    check_distinct_2d3d(corrs[:6], rig)

    sample = corrs[:6]
    rays = rays_for(sample, rig)
    v = np.array([c.target.v for c in sample])
    w = np.array([c.target.w for c in sample])
    d = np.array([r.direction for r in rays])
    m = np.array([np.cross(r.origin, r.direction) for r in rays])
    sigma = max(1.0, float(np.abs(w).max()), float(np.abs(m).max()))

    poses, complete, collapsed = _solve_chart(v, w, d, m, sigma)
    healthy = not collapsed
    if not complete:
        # a lost path can mean a pose at the chart's blind spot; retry under
        # prerotations until some chart accounts for every path
        for R0 in _PREROTATIONS:
            extra, complete, collapsed = _solve_chart(v @ R0.T, w @ R0.T,
                                                      d, m, sigma)
            poses += [PoseSE3(p.R @ R0, p.t) for p in extra]
            healthy |= not collapsed
            if complete:
                break
    if not healthy:
        raise NumericalFailure("path tracking collapsed in every chart")
    return verified_solution_set(poses, corrs, rig, tol=1e-6)
