"""Pose solvers and the problem registry used by RANSAC and the CLI.

Nine solver operations cover the full grid of localization problems: central
or generalized (rig) cameras, point or line map targets, 2D observations or
3D local points (known structure), optional gravity prior, optional known
scale.  Every solver returns a SolutionSet of all real candidates; least-
squares solvers return the single optimum with its residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DegenerateSample
from ..geometry import (
    GravityPrior,
    Pose,
    RigCalibration,
    point_line_residual,
    project_line,
)
from .alignment import solve_point_alignment
from .base import (
    Corr2D3D,
    Corr3D3D,
    SolutionSet,
    sample_residual_3d3d,
)
from .gpnp import solve_gpnp
from .line_alignment import solve_point_to_line_alignment
from .lines import solve_grel_linear, solve_p4l_u
from .p3p import solve_p3p
from .p6l import solve_p6l_minimal
from .vertical import solve_gpnp_u, solve_p2p_u

__all__ = [
    "Problem",
    "available_methods",
    "get_problem",
    "reprojection_residual",
    "solve_gpnp",
    "solve_gpnp_u",
    "solve_grel_linear",
    "solve_p2p_u",
    "solve_p3p",
    "solve_p4l_u",
    "solve_p6l_minimal",
    "solve_point_alignment",
    "solve_point_to_line_alignment",
]


def reprojection_residual(pose: Pose, corr: Corr2D3D,
                          rig: RigCalibration) -> float:
    """Image-plane residual in normalized units: reprojection distance for
    point targets, point-to-projected-line distance for line targets.
    Unprojectable configurations count as infinite."""
    cam = rig.cameras[corr.camera_index]
    full = cam.pose.compose(pose)
    if corr.is_line:
        try:
            l = project_line(full, corr.target)
        except Exception:
            return np.inf
        return abs(point_line_residual(corr.observation, l))
    Y = full.apply(corr.target)
    if Y[2] <= 0.0:
        return np.inf
    return float(np.linalg.norm(Y[:2] / Y[2] - corr.observation.xy))


def alignment_residual(pose: Pose, corr: Corr3D3D,
                       rig: Optional[RigCalibration] = None) -> float:
    """3D residual in scene units (point-to-point or point-to-line)."""
    return sample_residual_3d3d(pose, corr)


@dataclass(frozen=True)
class Problem:
    """One localization problem: a solver plus its sampling/scoring contract.

    `corr_type` selects the correspondence family ("2d3d" observations or
    "3d3d" local points); `target` the map side ("point" or "line");
    `sample_size` the minimal sample; `max_solutions` the candidate ceiling
    (None = single least-squares optimum or no fixed bound).
    """

    name: str
    corr_type: str
    target: str
    sample_size: int
    needs_gravity: bool
    scale_known: bool
    max_solutions: Optional[int]
    _solver: object

    def solve(self, corrs, rig: Optional[RigCalibration] = None,
              gravity: Optional[GravityPrior] = None) -> SolutionSet:
        if self.needs_gravity and gravity is None:
            raise ValueError(f"problem '{self.name}' requires a gravity prior")
        if self.corr_type == "2d3d":
            if rig is None:
                rig = RigCalibration.single()
            if self.needs_gravity:
                return self._solver(corrs, rig, gravity)
            return self._solver(corrs, rig)
        return self._solver(corrs, scale_known=self.scale_known,
                            gravity=gravity if self.needs_gravity else None)

    def residual(self, pose: Pose, corr,
                 rig: Optional[RigCalibration] = None) -> float:
        if self.corr_type == "2d3d":
            return reprojection_residual(pose, corr, rig)
        return alignment_residual(pose, corr)

    def check_corr(self, corr) -> None:
        want_line = self.target == "line"
        if corr.is_line != want_line:
            raise TypeError(
                f"problem '{self.name}' takes {self.target} targets")


def _central_p3p(corrs, rig):
    if not rig.is_single_central():
        raise DegenerateSample("p3p is a central-camera problem; use gpnp "
                               "for a rig")
    return solve_p3p(corrs)


def _central_p2p_u(corrs, rig, gravity):
    if not rig.is_single_central():
        raise DegenerateSample("p2p+u is a central-camera problem; use "
                               "gpnp+u for a rig")
    return solve_p2p_u(corrs, gravity)


_REGISTRY = {}


def _register(name, corr_type, target, sample_size, needs_gravity,
              scale_known, max_solutions, solver):
    _REGISTRY[name] = Problem(name, corr_type, target, sample_size,
                              needs_gravity, scale_known, max_solutions,
                              solver)


# 2D observations against map points
_register("p3p", "2d3d", "point", 3, False, True, 4, _central_p3p)
_register("p2p+u", "2d3d", "point", 2, True, True, 2, _central_p2p_u)
_register("gpnp", "2d3d", "point", 3, False, True, 8, solve_gpnp)
_register("gpnp+u", "2d3d", "point", 2, True, True, 2, solve_gpnp_u)
# 2D observations against map lines
_register("p6l", "2d3d", "line", 17, False, True, 1, solve_grel_linear)
_register("p6l-min", "2d3d", "line", 6, False, True, 64, solve_p6l_minimal)
_register("p4l+u", "2d3d", "line", 4, True, True, 4, solve_p4l_u)
# local 3D points (known structure) against map points
_register("align+s", "3d3d", "point", 3, False, True, 1, solve_point_alignment)
_register("align", "3d3d", "point", 3, False, False, 1, solve_point_alignment)
_register("align+u+s", "3d3d", "point", 2, True, True, 1, solve_point_alignment)
_register("align+u", "3d3d", "point", 2, True, False, 1, solve_point_alignment)
# local 3D points against map lines
_register("align-line+s", "3d3d", "line", 3, False, True, 8,
          solve_point_to_line_alignment)
_register("align-line", "3d3d", "line", 4, False, False, None,
          solve_point_to_line_alignment)
_register("align-line+u+s", "3d3d", "line", 2, True, True, 2,
          solve_point_to_line_alignment)
_register("align-line+u", "3d3d", "line", 3, True, False, 4,
          solve_point_to_line_alignment)


def available_methods() -> tuple:
    return tuple(sorted(_REGISTRY))


def get_problem(name: str, scale_known: bool = False,
                with_gravity: bool = False) -> Problem:
    """Look up a problem; base method names ("align", "align-line") are
    specialized by the scale/gravity flags the way the CLI exposes them."""
    if name in ("align", "align-line"):
        full = name + ("+u" if with_gravity else "") + ("+s" if scale_known else "")
        return _REGISTRY[full]
    if name not in _REGISTRY:
        raise KeyError(f"unknown method '{name}'; known: "
                       + ", ".join(available_methods()))
    return _REGISTRY[name]
