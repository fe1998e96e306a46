"""Privacy-preserving visual localization with 3D line-cloud maps.

A point-cloud map is obfuscated by replacing every 3D point with a
random-direction 3D line through it; camera poses are then estimated from
2D-point-to-3D-line (and 3D-point-to-3D-line) correspondences.  The package
provides the geometric core, minimal and non-minimal pose solvers for both
traditional point maps and line-cloud maps, seeded RANSAC with non-linear
refinement, a synthetic benchmark harness, privacy attacks, and a binary map
format with a CLI.
"""

from . import errors
from .geometry import (
    CANONICAL_VERTICAL,
    CompactLine,
    GeneralizedRay,
    GravityPrior,
    Observation2D,
    PluckerLine,
    PoseSE3,
    PoseSim3,
    RigCalibration,
    RigCamera,
    gravity_prealign,
    lift_point,
    line_point_at,
    point_line_residual,
    point_point_residual,
    project_line,
    project_point,
    ray_line_incidence,
)
from .codec import (
    codebook_covering_radius,
    decode_compact,
    direction_codebook,
    encode_compact,
)
from .solvers import available_methods, get_problem
from .solvers.base import Corr2D3D, Corr3D3D
from .robust import PoseEstimate, RansacConfig, ransac
from .refine import RefineConfig, estimate_and_refine, refine_pose

__version__ = "0.1.0"

__all__ = [
    "CANONICAL_VERTICAL",
    "CompactLine",
    "Corr2D3D",
    "Corr3D3D",
    "GeneralizedRay",
    "GravityPrior",
    "Observation2D",
    "PluckerLine",
    "PoseEstimate",
    "PoseSE3",
    "PoseSim3",
    "RansacConfig",
    "RefineConfig",
    "RigCalibration",
    "RigCamera",
    "available_methods",
    "codebook_covering_radius",
    "decode_compact",
    "direction_codebook",
    "encode_compact",
    "errors",
    "estimate_and_refine",
    "get_problem",
    "gravity_prealign",
    "lift_point",
    "line_point_at",
    "point_line_residual",
    "point_point_residual",
    "project_line",
    "project_point",
    "ray_line_incidence",
    "ransac",
    "refine_pose",
]
