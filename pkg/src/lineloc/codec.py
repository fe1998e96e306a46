"""Compact line encoding: 1 byte of quantized direction + 2 plane coordinates.

The direction codebook is a fixed 256-entry Fibonacci-sphere sampling; it is
part of the serialized format and must never change.  A line is stored as the
index of the nearest codebook direction together with the 2D coordinates of
the line's intersection with the plane through the origin orthogonal to that
codebook direction (in the deterministic plane basis of
:func:`lineloc.geometry.plane_basis`).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .geometry import CompactLine, PluckerLine, plane_basis

CODEBOOK_SIZE = 256


@lru_cache(maxsize=1)
def direction_codebook() -> np.ndarray:
    """The fixed (256, 3) array of unit codebook directions.

    Fibonacci sphere: entry i has z = 1 - (2i+1)/n and azimuth i times the
    golden angle pi*(3 - sqrt(5)).
    """
    n = CODEBOOK_SIZE
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    theta = math.pi * (3.0 - math.sqrt(5.0)) * i
    dirs = np.column_stack([r * np.cos(theta), r * np.sin(theta), z])
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    dirs.setflags(write=False)
    return dirs


def nearest_direction_index(v) -> int:
    """Codebook entry with maximal dot product; ties break to the lowest index
    (np.argmax returns the first maximizer)."""
    dots = direction_codebook() @ np.asarray(v, dtype=float)
    return int(np.argmax(dots))


def encode_compact(L: PluckerLine) -> CompactLine:
    """Quantize a line to a codebook direction plus its plane intersection.

    The nearest codebook direction u is within the covering radius of the
    true direction, so the line always crosses the plane orthogonal to u
    transversally and the intersection is well defined.
    """
    idx = nearest_direction_index(L.v)
    u = direction_codebook()[idx]
    o = L.closest_point_to_origin
    denom = float(L.v @ u)
    # |denom| >= cos(covering radius) ~= 0.99 by construction of idx.
    alpha = -float(u @ o) / denom
    q = o + alpha * L.v
    e1, e2 = plane_basis(u)
    return CompactLine(idx, float(e1 @ q), float(e2 @ q))


def decode_compact(c: CompactLine) -> PluckerLine:
    """Reconstruct the line through the stored plane point with the codebook
    direction."""
    u = direction_codebook()[c.direction_index]
    e1, e2 = plane_basis(u)
    q = c.plane_u * e1 + c.plane_v * e2
    return PluckerLine(u, np.cross(q, u))


@lru_cache(maxsize=1)
def codebook_covering_radius() -> float:
    """Largest angle (radians) from any unit direction to its nearest codebook
    entry, computed exactly.

    The maximum of the distance-to-nearest-site function on the sphere is
    attained at a vertex of the spherical Voronoi diagram of the codebook, so
    checking every Voronoi vertex is exhaustive.
    """
    from scipy.spatial import SphericalVoronoi

    dirs = np.asarray(direction_codebook())
    sv = SphericalVoronoi(dirs, radius=1.0, center=np.zeros(3))
    verts = sv.vertices / np.linalg.norm(sv.vertices, axis=1)[:, None]
    cos_nearest = np.max(verts @ dirs.T, axis=1)
    return float(np.max(np.arccos(np.clip(cos_nearest, -1.0, 1.0))))
