"""Exception types shared across the package."""


class LinelocError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateProjection(LinelocError):
    """Point lies on or behind the principal plane; cannot project."""


class BehindCamera(LinelocError):
    """Point has non-positive depth in the camera frame."""


class DegenerateLine(LinelocError):
    """Line cannot be represented (e.g. passes through the camera center)."""


class DegenerateSample(LinelocError):
    """Minimal sample is in degenerate position (collinear, coincident, ...)."""


class NumericalFailure(LinelocError):
    """A numerical routine failed to converge or produced no valid result."""


class RankDeficient(LinelocError):
    """Linear system does not have the rank required for a unique solution."""


class VerticalSingularity(LinelocError):
    """Configuration is singular for a known-vertical solver."""


class NotEnoughCorrespondences(LinelocError):
    """Fewer correspondences than the method's minimal sample size."""


class NoModelFound(LinelocError):
    """Robust estimation exhausted its budget without an acceptable model."""


class IdenticalLines(LinelocError):
    """Two lines are parallel or identical; closest approach is undefined."""


class ParallelLifting(LinelocError):
    """Lifting direction is numerically degenerate."""


class RepeatedLiftingRefused(LinelocError):
    """A point cloud with this content digest has already been lifted."""


class BadMagic(LinelocError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersion(LinelocError):
    """File format version is not supported by this reader."""


class TruncatedFile(LinelocError):
    """File ends before the declared payload is complete."""


class DimensionMismatch(LinelocError):
    """Array shapes or descriptor dimensions are inconsistent."""
