"""Core geometric types and operations.

Numpy arrays are the working representation throughout the package: ``Vec3``
and ``UnitVec3`` are shape-(3,) float arrays, rotations are 3x3 orthonormal
matrices with determinant +1, and homogeneous 2D image lines are shape-(3,)
arrays.  The dataclasses below bundle arrays with their invariants and
validate on construction.

Conventions
-----------
* Poses map the map frame into the camera / query frame:
  ``x_cam = R @ X_map + T`` (rigid) and ``x_q = s * (R @ X_map) + T``
  (similarity).
* A 3D line is a direction/moment pair ``(v, w)`` with ``|v| = 1`` and
  ``w = X x v`` for any point ``X`` on the line, hence ``v . w = 0``.
* Image observations are in normalized coordinates, i.e. pixel coordinates
  pre-multiplied by the inverse intrinsics.
* The canonical vertical direction is ``(0, 0, -1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import BehindCamera, DegenerateLine, DegenerateProjection

# Type aliases: these carry no runtime behaviour of their own, the invariants
# are enforced by the validating constructors below.
Vec3 = np.ndarray        # shape (3,), float
UnitVec3 = np.ndarray    # shape (3,), float, unit norm
RotationSO3 = np.ndarray  # shape (3, 3), orthonormal, det +1
ProjectedLine2D = np.ndarray  # shape (3,), homogeneous 2D line, scale-free

CANONICAL_VERTICAL = np.array([0.0, 0.0, -1.0])


# ---------------------------------------------------------------------------
# vectors


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([x, y, z], dtype=float)


def as_vec3(v) -> Vec3:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("3-vector has non-finite entries")
    return a


def normalized(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ValueError("cannot normalize a (near-)zero vector")
    return v / n


def unit3(v) -> UnitVec3:
    """Coerce to a unit 3-vector (normalizing)."""
    return normalized(as_vec3(v))


def skew(v) -> np.ndarray:
    """Cross-product matrix: skew(a) @ b == cross(a, b)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# rotations


def check_rotation(R, tol: float = 1e-9) -> RotationSO3:
    """Validate that R is orthonormal with determinant +1; returns R."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {R.shape}")
    err = np.max(np.abs(R.T @ R - np.eye(3)))
    if err > tol:
        raise ValueError(f"matrix is not orthonormal (deviation {err:.3e})")
    if np.linalg.det(R) < 0:
        raise ValueError("matrix has determinant -1 (reflection)")
    return R


def so3_project(M) -> RotationSO3:
    """Nearest rotation (Frobenius norm) to an arbitrary 3x3 matrix."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    R = U @ Vt
    if np.linalg.det(R) < 0:
        R = (U * np.array([1.0, 1.0, -1.0])) @ Vt
    return R


def rotation_from_axis_angle(axis, angle: float) -> RotationSO3:
    a = unit3(axis)
    K = skew(a)
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def rotation_about_z(angle: float) -> RotationSO3:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_between(a, b) -> RotationSO3:
    """Minimal rotation sending unit vector a to unit vector b.

    The antipodal case (a == -b) is resolved by a fixed 180 degree rotation
    about whichever coordinate axis is least aligned with a.
    """
    a = unit3(a)
    b = unit3(b)
    axis = np.cross(a, b)
    s = np.linalg.norm(axis)
    c = float(a @ b)
    if s < 1e-15:
        if c > 0.0:
            return np.eye(3)
        e1, _ = plane_basis(a)
        return rotation_from_axis_angle(e1, math.pi)
    return rotation_from_axis_angle(axis / s, math.atan2(s, c))


def rotation_geodesic(Ra, Rb) -> float:
    """Angle in radians of the relative rotation Ra^T Rb, in [0, pi]."""
    t = (np.trace(np.asarray(Ra).T @ np.asarray(Rb)) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, t)))


def random_rotation(rng: np.random.Generator) -> RotationSO3:
    """Uniform random rotation (normalized Gaussian quaternion)."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    return quat_wxyz_to_matrix(q)


def quat_wxyz_to_matrix(q) -> RotationSO3:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat_wxyz(R) -> np.ndarray:
    """Unit quaternion (w, x, y, z) with w >= 0 for a rotation matrix."""
    R = np.asarray(R, dtype=float)
    q = np.empty(4)
    tr = np.trace(R)
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2.0
        q[:] = s / 4.0, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(1.0 + R[i, i] - R[j, j] - R[k, k], 0.0)) * 2.0
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = s / 4.0
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def plane_basis(n) -> Tuple[UnitVec3, UnitVec3]:
    """Deterministic orthonormal basis (e1, e2) of the plane orthogonal to n.

    Right-handed with e1 x e2 == n.  The construction depends only on the
    components of n (no randomness), so callers can rely on it as part of
    serialized formats.
    """
    n = unit3(n)
    k = int(np.argmin(np.abs(n)))
    a = np.zeros(3)
    a[k] = 1.0
    e1 = normalized(np.cross(n, a))
    e2 = np.cross(n, e1)
    return e1, e2


# ---------------------------------------------------------------------------
# poses


@dataclass(frozen=True)
class PoseSE3:
    """Rigid transform, x_cam = R @ X_map + t."""

    R: RotationSO3
    t: Vec3

    def __post_init__(self):
        object.__setattr__(self, "R", _frozen(check_rotation(self.R)))
        object.__setattr__(self, "t", _frozen(as_vec3(self.t)))

    @staticmethod
    def identity() -> "PoseSE3":
        return PoseSE3(np.eye(3), np.zeros(3))

    @property
    def scale(self) -> float:
        return 1.0

    @property
    def center(self) -> Vec3:
        """Camera (or body) origin expressed in the map frame."""
        return -self.R.T @ self.t

    def apply(self, X) -> Vec3:
        return self.R @ as_vec3(X) + self.t

    def apply_many(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.R.T + self.t

    def inverse(self) -> "PoseSE3":
        return PoseSE3(self.R.T, -self.R.T @ self.t)

    def compose(self, other: "PoseSE3") -> "PoseSE3":
        """Pose applying `other` first, then self."""
        return PoseSE3(self.R @ other.R, self.R @ other.t + self.t)

    def matrix(self) -> np.ndarray:
        """3x4 matrix [R | t]."""
        return np.hstack([self.R, self.t[:, None]])

    def to_sim3(self) -> "PoseSim3":
        return PoseSim3(1.0, self.R, self.t)


@dataclass(frozen=True)
class PoseSim3:
    """Similarity transform, x_q = s * (R @ X_map) + t, s > 0."""

    s: float
    R: RotationSO3
    t: Vec3

    def __post_init__(self):
        s = float(self.s)
        if not (math.isfinite(s) and s > 0.0):
            raise ValueError(f"similarity scale must be positive, got {s}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "R", _frozen(check_rotation(self.R)))
        object.__setattr__(self, "t", _frozen(as_vec3(self.t)))

    @staticmethod
    def identity() -> "PoseSim3":
        return PoseSim3(1.0, np.eye(3), np.zeros(3))

    @property
    def scale(self) -> float:
        return self.s

    @property
    def center(self) -> Vec3:
        return -self.R.T @ self.t / self.s

    def apply(self, X) -> Vec3:
        return self.s * (self.R @ as_vec3(X)) + self.t

    def apply_many(self, X: np.ndarray) -> np.ndarray:
        return self.s * (np.asarray(X, dtype=float) @ self.R.T) + self.t

    def inverse(self) -> "PoseSim3":
        return PoseSim3(1.0 / self.s, self.R.T, -self.R.T @ self.t / self.s)

    def compose(self, other: "PoseSim3") -> "PoseSim3":
        return PoseSim3(self.s * other.s, self.R @ other.R,
                        self.s * (self.R @ other.t) + self.t)

    def to_se3(self, tol: float = 1e-9) -> PoseSE3:
        if abs(self.s - 1.0) > tol:
            raise ValueError(f"scale {self.s} is not 1; cannot reduce to a rigid pose")
        return PoseSE3(self.R, self.t)


Pose = Union[PoseSE3, PoseSim3]


# ---------------------------------------------------------------------------
# lines, observations, rays


@dataclass(frozen=True)
class PluckerLine:
    """3D line as (unit direction v, moment w) with v . w = 0.

    For any point X on the line, w == X x v.  The same geometric line is also
    represented by (-v, -w); no sign canonicalization is applied.
    """

    v: UnitVec3
    w: Vec3

    def __post_init__(self):
        v = as_vec3(self.v)
        w = as_vec3(self.w)
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError("line direction must be unit length")
        if abs(v @ w) > 1e-10 * max(1.0, np.linalg.norm(w)):
            raise ValueError("line moment must be orthogonal to the direction")
        object.__setattr__(self, "v", _frozen(v))
        object.__setattr__(self, "w", _frozen(w))

    @staticmethod
    def from_point_direction(X, v) -> "PluckerLine":
        v = unit3(v)
        return PluckerLine(v, np.cross(as_vec3(X), v))

    @staticmethod
    def from_direction_moment(v, w, orthogonalize: bool = False) -> "PluckerLine":
        """Canonicalize an unnormalized (direction, moment) pair.

        Both components are divided by |direction|; with `orthogonalize` the
        component of w along v is removed (for inputs only approximately
        satisfying v . w = 0).
        """
        v = as_vec3(v)
        w = as_vec3(w)
        n = np.linalg.norm(v)
        if n < 1e-12:
            raise ValueError("line direction is (near-)zero")
        v = v / n
        w = w / n
        if orthogonalize:
            w = w - (v @ w) * v
        return PluckerLine(v, w)

    @property
    def closest_point_to_origin(self) -> Vec3:
        return np.cross(self.v, self.w)

    def point_at(self, alpha: float) -> Vec3:
        return np.cross(self.v, self.w) + alpha * self.v

    def distance_to(self, X) -> float:
        return float(np.linalg.norm(self.w - np.cross(as_vec3(X), self.v)))

    def transformed(self, pose: Pose) -> "PluckerLine":
        """The line expressed in the query frame of `pose`."""
        Rv = pose.R @ self.v
        w = pose.scale * (pose.R @ self.w) + np.cross(pose.t, Rv)
        return PluckerLine(Rv, w)

    def reversed(self) -> "PluckerLine":
        return PluckerLine(-self.v, -self.w)


@dataclass(frozen=True)
class Observation2D:
    """Image observation in normalized coordinates, with optional depth."""

    x: float
    y: float
    depth: Optional[float] = None

    def __post_init__(self):
        x, y = float(self.x), float(self.y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError("observation coordinates must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.depth is not None:
            d = float(self.depth)
            if not (math.isfinite(d) and d > 0.0):
                raise ValueError(f"depth must be finite and positive, got {d}")
            object.__setattr__(self, "depth", d)

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def xbar(self) -> np.ndarray:
        """Homogeneous coordinates (x, y, 1)."""
        return np.array([self.x, self.y, 1.0])


@dataclass(frozen=True)
class GeneralizedRay:
    """Viewing ray with origin offset, in the rig/body frame."""

    origin: Vec3
    direction: UnitVec3

    def __post_init__(self):
        o = as_vec3(self.origin)
        d = as_vec3(self.direction)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("ray direction must be unit length")
        object.__setattr__(self, "origin", _frozen(o))
        object.__setattr__(self, "direction", _frozen(d))

    @staticmethod
    def central(direction) -> "GeneralizedRay":
        """Ray through the origin (single pinhole camera)."""
        return GeneralizedRay(np.zeros(3), unit3(direction))

    def line(self) -> PluckerLine:
        return PluckerLine(self.direction, np.cross(self.origin, self.direction))

    def point_at(self, depth: float) -> Vec3:
        return self.origin + depth * self.direction


@dataclass(frozen=True)
class RigCamera:
    """One camera of a rig: pose mapping body frame to camera frame, plus
    pinhole intrinsics in pixels."""

    pose: PoseSE3
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        for name in ("fx", "fy", "cx", "cy"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def normalize_pixel(self, u: float, v: float) -> np.ndarray:
        return np.array([(u - self.cx) / self.fx, (v - self.cy) / self.fy])

    def pixel_from_normalized(self, xy) -> np.ndarray:
        x, y = xy
        return np.array([x * self.fx + self.cx, y * self.fy + self.cy])


@dataclass(frozen=True)
class RigCalibration:
    """Ordered collection of rig cameras; index 0 is the reference camera."""

    cameras: Tuple[RigCamera, ...]

    def __post_init__(self):
        cams = tuple(self.cameras)
        if len(cams) == 0:
            raise ValueError("a rig needs at least one camera")
        object.__setattr__(self, "cameras", cams)

    def __len__(self) -> int:
        return len(self.cameras)

    @staticmethod
    def single(focal: float = 1.0, cx: float = 0.0, cy: float = 0.0) -> "RigCalibration":
        """Single camera placed at the body origin."""
        cam = RigCamera(PoseSE3.identity(), focal, focal, cx, cy)
        return RigCalibration((cam,))

    def is_single_central(self) -> bool:
        if len(self.cameras) != 1:
            return False
        p = self.cameras[0].pose
        return (np.allclose(p.R, np.eye(3), atol=1e-12)
                and np.allclose(p.t, 0.0, atol=1e-12))

    def ray(self, camera_index: int, obs: "Observation2D") -> GeneralizedRay:
        """Body-frame viewing ray for a normalized observation."""
        cam = self.cameras[camera_index]
        d_cam = normalized(obs.xbar)
        Rc, tc = cam.pose.R, cam.pose.t
        return GeneralizedRay(-Rc.T @ tc, Rc.T @ d_cam)


@dataclass(frozen=True)
class GravityPrior:
    """Gravity (vertical) directions measured in the map and query frames."""

    gravity_map: UnitVec3
    gravity_query: UnitVec3

    def __post_init__(self):
        object.__setattr__(self, "gravity_map", _frozen(unit3(self.gravity_map)))
        object.__setattr__(self, "gravity_query", _frozen(unit3(self.gravity_query)))


@dataclass(frozen=True)
class CompactLine:
    """Quantized line: codebook direction index plus the 2D coordinates of the
    line's intersection with the plane through the origin orthogonal to the
    codebook direction."""

    direction_index: int
    plane_u: float
    plane_v: float

    def __post_init__(self):
        idx = int(self.direction_index)
        if not (0 <= idx <= 255):
            raise ValueError(f"direction index {idx} outside [0, 255]")
        object.__setattr__(self, "direction_index", idx)
        object.__setattr__(self, "plane_u", float(self.plane_u))
        object.__setattr__(self, "plane_v", float(self.plane_v))


# ---------------------------------------------------------------------------
# lifting


def random_unit_vector(rng: np.random.Generator) -> UnitVec3:
    """Uniform direction on the unit sphere (normalized Gaussian triple)."""
    while True:
        g = rng.standard_normal(3)
        n = np.linalg.norm(g)
        if n >= 1e-6:
            return g / n


def lift_point(X, rng: np.random.Generator) -> PluckerLine:
    """Replace a 3D point by a uniformly random-direction line through it.

    The point is not recoverable from the returned line alone: every point on
    the line is an equally valid preimage.
    """
    X = as_vec3(X)
    v = random_unit_vector(rng)
    return PluckerLine(v, np.cross(X, v))


def line_point_at(L: PluckerLine, alpha: float) -> Vec3:
    """Point on L at signed distance alpha from the point closest to the origin."""
    return L.point_at(alpha)


# ---------------------------------------------------------------------------
# projection and residuals


def project_point(pose: Pose, X) -> np.ndarray:
    """Normalized image coordinates of a map point; raises BehindCamera if the
    transformed point has non-positive depth."""
    Xc = pose.apply(X)
    if Xc[2] <= 0.0:
        raise BehindCamera(f"point has depth {Xc[2]:.3e} in the camera frame")
    return Xc[:2] / Xc[2]


def project_line(pose: PoseSE3, L: PluckerLine) -> ProjectedLine2D:
    """Homogeneous 2D image line of a 3D line under a rigid pose.

    The image line is the moment of the camera-frame line: the plane through
    the camera center containing the line has normal R w + t x (R v), and the
    image of the line is the intersection of that plane with the image plane.
    """
    Rv = pose.R @ L.v
    l = pose.R @ L.w + np.cross(pose.t, Rv)
    ref = max(1.0, float(np.linalg.norm(pose.t)))
    if np.linalg.norm(l) < 1e-10 * ref:
        raise DegenerateProjection("line passes through the camera center")
    return l


def point_line_residual(x: Union[Observation2D, Sequence[float]], l) -> float:
    """Signed distance from an observation to a homogeneous 2D line, in
    normalized image units."""
    l = np.asarray(l, dtype=float)
    denom = l[0] * l[0] + l[1] * l[1]
    if denom == 0.0:
        raise DegenerateLine("image line has no finite direction (l1 = l2 = 0)")
    if isinstance(x, Observation2D):
        xbar = x.xbar
    else:
        xbar = np.array([x[0], x[1], 1.0])
    return float(xbar @ l / math.sqrt(denom))


def point_point_residual(x: Union[Observation2D, Sequence[float]], pose: Pose, X) -> float:
    """Euclidean reprojection distance in normalized image units."""
    xy = x.xy if isinstance(x, Observation2D) else np.asarray(x, dtype=float)[:2]
    return float(np.linalg.norm(xy - project_point(pose, X)))


def ray_line_incidence(pose: Pose, ray: GeneralizedRay, L: PluckerLine) -> float:
    """Reciprocal product of the pose-mapped ray with a map line.

    The ray is mapped into the map frame by the inverse pose; the value is
    zero iff the mapped ray's line intersects L (or is parallel-coincident).
    """
    Rt = pose.R.T
    c_m = Rt @ (ray.origin - pose.t) / pose.scale
    d_m = Rt @ ray.direction
    return float(d_m @ L.w + L.v @ np.cross(c_m, d_m))


# ---------------------------------------------------------------------------
# gravity


def rotation_to_vertical(g) -> RotationSO3:
    """Minimal rotation sending unit vector g to the canonical vertical
    (0, 0, -1); antipodal input maps via a 180 degree rotation about x."""
    g = unit3(g)
    axis = np.cross(g, CANONICAL_VERTICAL)
    s = np.linalg.norm(axis)
    c = float(g @ CANONICAL_VERTICAL)
    if s < 1e-15:
        if c > 0.0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])
    return rotation_from_axis_angle(axis / s, math.atan2(s, c))


def gravity_prealign(g: GravityPrior) -> Tuple[RotationSO3, RotationSO3]:
    """Rotations (R_map, R_query) sending the two measured gravity directions
    to the canonical vertical.

    After rotating map-side data by R_map and query-side data by R_query, the
    residual rotation between the frames is purely about the vertical axis.
    """
    return rotation_to_vertical(g.gravity_map), rotation_to_vertical(g.gravity_query)
