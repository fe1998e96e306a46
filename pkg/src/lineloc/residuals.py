"""Vectorized residuals and Jacobians for the four localization cost kinds.

The same models serve RANSAC scoring (scalar distances per correspondence)
and Levenberg-Marquardt refinement (stacked residual vectors and analytic
Jacobians).  Residual vectors are chosen so that their squared norm equals
the squared scalar distance:

  * "point":       2D reprojection difference (2 rows per correspondence);
  * "line":        signed distance between the observation and the projected
                   image line (1 row);
  * "align_point": 3D difference s R X + t - X_local (3 rows);
  * "align_line":  3D point-to-line displacement, i.e. the difference above
                   projected off the line direction (3 rows, rank 2).

Pose increments are left-multiplicative: R <- exp([w]x) R, t <- t + dt and,
for similarities, s <- s exp(ds), which keeps the scale positive.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .geometry import (
    Pose,
    PoseSE3,
    PoseSim3,
    RigCalibration,
    rotation_from_axis_angle,
    skew,
    so3_project,
)
from .solvers.base import Corr2D3D, Corr3D3D

COST_KINDS = ("point", "line", "align_point", "align_line")


def rotation_increment(omega: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(omega))
    if n < 1e-300:
        return np.eye(3)
    return rotation_from_axis_angle(omega / n, n)


def apply_increment(pose: Pose, delta: np.ndarray) -> Pose:
    """Update a pose by a tangent increment [w, dt(, ds)]."""
    R = so3_project(rotation_increment(delta[:3]) @ pose.R)
    t = pose.t + delta[3:6]
    if isinstance(pose, PoseSim3):
        return PoseSim3(pose.s * np.exp(delta[6]), R, t)
    return PoseSE3(R, t)


def _skew_rows(a: np.ndarray) -> np.ndarray:
    """(n, 3, 3) cross-product matrices of the rows of a."""
    out = np.zeros(a.shape[:-1] + (3, 3))
    out[..., 0, 1] = -a[..., 2]
    out[..., 0, 2] = a[..., 1]
    out[..., 1, 0] = a[..., 2]
    out[..., 1, 2] = -a[..., 0]
    out[..., 2, 0] = -a[..., 1]
    out[..., 2, 1] = a[..., 0]
    return out


class ResidualModel:
    """Residuals of a fixed correspondence set under one cost kind.

    distances(pose) gives per-correspondence scalar distances (np.inf for
    unprojectable configurations); residuals_and_jacobian(pose, mask) gives
    the stacked residual vector and its Jacobian over the selected subset.
    """

    def __init__(self, kind: str, corrs: Sequence, rig: Optional[RigCalibration] = None):
        if kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind '{kind}'")
        self.kind = kind
        self.n = len(corrs)
        self.rows_per_corr = {"point": 2, "line": 1,
                              "align_point": 3, "align_line": 3}[kind]
        if kind in ("point", "line"):
            if rig is None:
                rig = RigCalibration.single()
            self.rig = rig
            want_line = kind == "line"
            for c in corrs:
                if not isinstance(c, Corr2D3D) or c.is_line != want_line:
                    raise TypeError(f"cost kind '{kind}' needs 2D observations "
                                    f"of {'line' if want_line else 'point'} targets")
            self.cam_index = np.array([c.camera_index for c in corrs])
            self.Rc = np.array([rig.cameras[i].pose.R for i in self.cam_index])
            self.tc = np.array([rig.cameras[i].pose.t for i in self.cam_index])
            # per-camera slices: scoring runs a (n,3)@(3,3) matmul per
            # distinct camera instead of per-correspondence 3x3 products
            self._cam_groups = [
                (np.flatnonzero(self.cam_index == k), rig.cameras[k].pose.R,
                 rig.cameras[k].pose.t)
                for k in np.unique(self.cam_index)]
            if want_line:
                self.v = np.array([c.target.v for c in corrs])
                self.w = np.array([c.target.w for c in corrs])
                self.xbar = np.array([c.observation.xbar for c in corrs])
                self._dist_groups = [
                    (idx, np.ascontiguousarray(self.v[idx]),
                     np.ascontiguousarray(self.w[idx]),
                     np.ascontiguousarray(self.xbar[idx]), Rc, tc)
                    for idx, Rc, tc in self._cam_groups]
            else:
                self.X = np.array([c.target for c in corrs])
                self.xy = np.array([c.observation.xy for c in corrs])
                self._dist_groups = [
                    (idx, np.ascontiguousarray(self.X[idx]),
                     np.ascontiguousarray(self.xy[idx]), Rc, tc)
                    for idx, Rc, tc in self._cam_groups]
        else:
            want_line = kind == "align_line"
            for c in corrs:
                if not isinstance(c, Corr3D3D) or c.is_line != want_line:
                    raise TypeError(f"cost kind '{kind}' needs local 3D points "
                                    f"against {'line' if want_line else 'point'} targets")
            self.Xl = np.array([c.local_point for c in corrs])
            if want_line:
                self.o = np.array([c.target.closest_point_to_origin for c in corrs])
                self.v = np.array([c.target.v for c in corrs])
            else:
                self.X = np.array([c.target for c in corrs])

    # -- scalar distances -------------------------------------------------

    def distances(self, pose: Pose) -> np.ndarray:
        if self.kind == "point":
            d = np.empty(self.n)
            s = pose.scale
            for idx, Xg, xyg, Rc, tc in self._dist_groups:
                Y = Xg @ (s * (Rc @ pose.R)).T
                Y += Rc @ pose.t + tc
                z = Y[:, 2]
                with np.errstate(divide="ignore", invalid="ignore"):
                    dg = np.hypot(Y[:, 0] / z - xyg[:, 0],
                                  Y[:, 1] / z - xyg[:, 1])
                dg[z <= 1e-12] = np.inf
                d[idx] = dg
            return d
        if self.kind == "line":
            d = np.empty(self.n)
            for idx, vg, wg, xg, Rc, tc in self._dist_groups:
                M = Rc @ pose.R
                l = wg @ M.T + (vg @ M.T) @ skew(Rc @ pose.t + tc).T
                den = np.hypot(l[:, 0], l[:, 1])
                with np.errstate(divide="ignore", invalid="ignore"):
                    dg = np.abs(np.einsum("ij,ij->i", xg, l)) / den
                dg[den <= 1e-12] = np.inf
                d[idx] = dg
            return d
        r = self._align_residuals(pose)
        return np.linalg.norm(r, axis=1)

    # -- residual vectors and Jacobians -----------------------------------

    def residuals_and_jacobian(self, pose: Pose,
                               mask: Optional[np.ndarray] = None):
        """Stacked residual vector (M*rows,) and Jacobian (M*rows, dim) over
        the masked subset; dim is 6 for rigid poses, 7 for similarities."""
        if mask is None:
            mask = np.ones(self.n, dtype=bool)
        dim = 7 if isinstance(pose, PoseSim3) else 6
        if self.kind == "point":
            r, J = self._point_rj(pose, mask)
        elif self.kind == "line":
            r, J = self._line_rj(pose, mask)
        else:
            r, J = self._align_rj(pose, mask, dim)
        return r.reshape(-1), J.reshape(-1, dim)

    # -- internals --------------------------------------------------------

    def _camera_points(self, pose: Pose) -> np.ndarray:
        B = pose.apply_many(self.X)
        Y = np.empty_like(B)
        for sel, Rc, tc in self._cam_groups:
            Y[sel] = B[sel] @ Rc.T + tc
        return Y

    def _image_lines(self, pose: PoseSE3):
        Rv = self.v @ pose.R.T                 # body frame
        Rw = self.w @ pose.R.T
        l = np.empty((self.n, 3))
        RFv = np.empty((self.n, 3))
        tF = np.empty((self.n, 3))
        for sel, Rc, tc in self._cam_groups:
            t_c = Rc @ pose.t + tc
            RFv[sel] = Rv[sel] @ Rc.T
            l[sel] = Rw[sel] @ Rc.T + RFv[sel] @ skew(t_c).T
            tF[sel] = t_c
        return l, (Rv, Rw, RFv), tF

    def _align_residuals(self, pose: Pose) -> np.ndarray:
        """Query-frame alignment residual vectors (n, 3)."""
        if self.kind == "align_point":
            return pose.apply_many(self.X) - self.Xl
        u = pose.apply_many(self.o) - self.Xl
        vp = self.v @ pose.R.T
        return u - vp * np.sum(vp * u, axis=1)[:, None]

    def _point_rj(self, pose, mask):
        Y = self._camera_points(pose)[mask]
        z = Y[:, 2]
        uv = Y[:, :2] / z[:, None]
        r = uv - self.xy[mask]
        # dY/d[w,t]
        RX = self.X[mask] @ pose.R.T
        Rc = self.Rc[mask]
        dY = np.empty((len(Y), 3, 6))
        dY[:, :, :3] = -np.matmul(Rc, _skew_rows(RX))
        dY[:, :, 3:] = Rc
        P = np.zeros((len(Y), 2, 3))
        P[:, 0, 0] = 1.0 / z
        P[:, 1, 1] = 1.0 / z
        P[:, 0, 2] = -Y[:, 0] / z**2
        P[:, 1, 2] = -Y[:, 1] / z**2
        return r, np.matmul(P, dY)

    def _line_rj(self, pose, mask):
        l, (Rv, Rw, RFv), tF = self._image_lines(pose)
        l, Rv, Rw, RFv, tF = l[mask], Rv[mask], Rw[mask], RFv[mask], tF[mask]
        xbar = self.xbar[mask]
        Rc = self.Rc[mask]
        num = np.sum(xbar * l, axis=1)
        den = np.hypot(l[:, 0], l[:, 1])
        r = (num / den)[:, None]
        dl = np.empty((len(l), 3, 6))
        dl[:, :, :3] = (-np.matmul(Rc, _skew_rows(Rw))
                        - np.matmul(np.matmul(_skew_rows(tF), Rc), _skew_rows(Rv)))
        dl[:, :, 3:] = -np.matmul(_skew_rows(RFv), Rc)
        drdl = xbar / den[:, None]
        drdl[:, :2] -= (num / den**3)[:, None] * l[:, :2]
        return r, np.einsum("nc,ncp->np", drdl, dl)[:, None, :]

    def _align_rj(self, pose, mask, dim):
        s = pose.scale
        if self.kind == "align_point":
            sRX = s * (self.X[mask] @ pose.R.T)
            r = sRX + pose.t - self.Xl[mask]
            J = np.empty((len(r), 3, dim))
            J[:, :, :3] = -_skew_rows(sRX)
            J[:, :, 3:6] = np.eye(3)
            if dim == 7:
                J[:, :, 6] = sRX
            return r, J
        # point-to-line: project the anchor displacement off the rotated
        # direction; the projector itself rotates with the pose
        sRo = s * (self.o[mask] @ pose.R.T)
        vp = self.v[mask] @ pose.R.T
        u = sRo + pose.t - self.Xl[mask]
        vu = np.sum(vp * u, axis=1)
        r = u - vp * vu[:, None]
        proj = np.eye(3)[None] - vp[:, None, :] * vp[:, :, None]
        J = np.empty((len(r), 3, dim))
        D = -_skew_rows(vp)                     # columns e_k x v'
        Du = np.einsum("nj,njk->nk", u, D)
        J[:, :, :3] = (-np.matmul(proj, _skew_rows(sRo))
                       - vu[:, None, None] * D
                       - vp[:, :, None] * Du[:, None, :])
        J[:, :, 3:6] = proj
        if dim == 7:
            J[:, :, 6] = np.einsum("nij,nj->ni", proj, sRo)
        return r, J
