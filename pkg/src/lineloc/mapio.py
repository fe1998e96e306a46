"""Line-cloud persistence, lifting permanence, and descriptor matching.

A line-cloud map stores one 3D line per discarded map point plus the point's
feature descriptor; the point coordinates themselves never enter the
container.  Maps carry two SHA-256 digests: one of the source content and one
binding (seed, content), so lifting the same points again under a different
seed can be detected and refused — intersecting two independent liftings
recovers the points exactly, so the lift must happen only once.

Binary format (little-endian): magic ``LC3D``, u32 version (=1), u8 mode
(0 = full, 6 x f64 per line; 1 = compact, 2 x f32 + u8 per line), u32
descriptor dimension, u64 line count, the line records, the f32 descriptor
block, then the two raw 32-byte digests.  Mode 0 roundtrips bit-exactly.  A
human-readable JSON sidecar can be written next to the binary for debugging.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .codec import decode_compact, encode_compact
from .errors import (
    BadMagic,
    DimensionMismatch,
    RepeatedLiftingRefused,
    TruncatedFile,
    UnsupportedVersion,
)
from .geometry import CompactLine, Observation2D, PluckerLine, lift_point
from .solvers.base import Corr2D3D

MAGIC = b"LC3D"
FORMAT_VERSION = 1
MODE_FULL = 0
MODE_COMPACT = 1

_HEADER = struct.Struct("<IBIQ")   # version, mode, descriptor_dim, count
_COMPACT_DTYPE = np.dtype([("u", "<f4"), ("v", "<f4"), ("idx", "u1")])


@dataclass(frozen=True)
class PointCloudInput:
    """Source points (n, 3) with optional per-point descriptors (n, k)."""

    points: np.ndarray
    descriptors: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise ValueError("points must be a nonempty (n, 3) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        if self.descriptors is None:
            desc = np.zeros((len(pts), 0), dtype=np.float32)
        else:
            desc = np.ascontiguousarray(
                np.asarray(self.descriptors, dtype=np.float32))
            if desc.ndim != 2 or len(desc) != len(pts):
                raise ValueError("descriptors must be one row per point")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "descriptors", desc)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class LineCloudMap:
    """One line and one descriptor per discarded source point.

    `content_digest` identifies the source points (hex SHA-256);
    `seed_digest` additionally binds the lifting seed without revealing it.
    """

    lines: Tuple[Union[PluckerLine, CompactLine], ...]
    descriptors: np.ndarray
    content_digest: str
    seed_digest: str
    version: int = FORMAT_VERSION

    def __post_init__(self):
        if len(self.lines) == 0:
            raise ValueError("a map needs at least one line")
        kinds = {type(l) for l in self.lines}
        if kinds not in ({PluckerLine}, {CompactLine}):
            raise TypeError("lines must be all PluckerLine or all CompactLine")
        desc = np.ascontiguousarray(
            np.asarray(self.descriptors, dtype=np.float32))
        if desc.ndim != 2 or len(desc) != len(self.lines):
            raise ValueError("need exactly one descriptor row per line")
        object.__setattr__(self, "descriptors", desc)
        object.__setattr__(self, "lines", tuple(self.lines))

    @property
    def compact(self) -> bool:
        return isinstance(self.lines[0], CompactLine)

    @property
    def descriptor_dim(self) -> int:
        return self.descriptors.shape[1]

    def __len__(self) -> int:
        return len(self.lines)

    def plucker_lines(self) -> Tuple[PluckerLine, ...]:
        """The stored lines as PluckerLine, decoding compact records."""
        if not self.compact:
            return self.lines
        return tuple(decode_compact(c) for c in self.lines)


# ---------------------------------------------------------------------------
# lifting


def _digests(points: np.ndarray, descriptors: np.ndarray,
             seed: int) -> Tuple[str, str]:
    content = hashlib.sha256()
    content.update(points.astype("<f8").tobytes())
    content.update(descriptors.astype("<f4").tobytes())
    seeded = hashlib.sha256()
    seeded.update(b"lineloc-lift/")
    seeded.update(struct.pack("<q", seed))
    seeded.update(content.digest())
    return content.hexdigest(), seeded.hexdigest()


def lift_map(source: PointCloudInput, seed: int, compact: bool = False,
             existing: Optional[LineCloudMap] = None,
             override: bool = False) -> LineCloudMap:
    """Replace every source point by a random line through it.

    Same (source, seed) always produces the identical map.  When `existing`
    is a map previously lifted from the same content under a different seed,
    the call is refused unless `override` is set: publishing two independent
    liftings lets an attacker intersect them and recover every point.
    """
    content_digest, seed_digest = _digests(source.points, source.descriptors,
                                           seed)
    if (existing is not None
            and existing.content_digest == content_digest
            and existing.seed_digest != seed_digest
            and not override):
        raise RepeatedLiftingRefused(
            "these points were already lifted under a different seed; "
            "a second independent lifting would expose them")
    rng = np.random.default_rng(seed)
    lines: List[Union[PluckerLine, CompactLine]] = [
        lift_point(X, rng) for X in source.points]
    if compact:
        lines = [encode_compact(l) for l in lines]
    return LineCloudMap(tuple(lines), source.descriptors,
                        content_digest, seed_digest)


# ---------------------------------------------------------------------------
# binary format


def write_map(m: LineCloudMap, path, sidecar: bool = False) -> None:
    mode = MODE_COMPACT if m.compact else MODE_FULL
    blob = bytearray()
    blob += MAGIC
    blob += _HEADER.pack(m.version, mode, m.descriptor_dim, len(m))
    if mode == MODE_FULL:
        recs = np.empty((len(m), 6), dtype="<f8")
        for i, l in enumerate(m.lines):
            recs[i, :3] = l.v
            recs[i, 3:] = l.w
        blob += recs.tobytes()
    else:
        recs = np.empty(len(m), dtype=_COMPACT_DTYPE)
        for i, l in enumerate(m.lines):
            recs[i] = (l.plane_u, l.plane_v, l.direction_index)
        blob += recs.tobytes()
    blob += m.descriptors.astype("<f4").tobytes()
    blob += bytes.fromhex(m.content_digest)
    blob += bytes.fromhex(m.seed_digest)
    with open(path, "wb") as fh:
        fh.write(blob)
    if sidecar:
        with open(str(path) + ".json", "w") as fh:
            json.dump(map_to_json(m), fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_map(path) -> LineCloudMap:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise BadMagic(f"not a line-cloud file: magic {blob[:4]!r}")
    if len(blob) < 4 + _HEADER.size:
        raise TruncatedFile("header incomplete")
    version, mode, ddim, count = _HEADER.unpack_from(blob, 4)
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"format version {version} not supported")
    if mode not in (MODE_FULL, MODE_COMPACT):
        raise UnsupportedVersion(f"unknown line record mode {mode}")
    rec_size = 48 if mode == MODE_FULL else _COMPACT_DTYPE.itemsize
    offset = 4 + _HEADER.size
    need = offset + count * rec_size + count * ddim * 4 + 64
    if len(blob) < need:
        raise TruncatedFile(f"expected {need} bytes, file has {len(blob)}")

    if mode == MODE_FULL:
        recs = np.frombuffer(blob, dtype="<f8", count=count * 6,
                             offset=offset).reshape(count, 6)
        lines = tuple(PluckerLine(r[:3].copy(), r[3:].copy()) for r in recs)
    else:
        recs = np.frombuffer(blob, dtype=_COMPACT_DTYPE, count=count,
                             offset=offset)
        lines = tuple(CompactLine(int(r["idx"]), float(r["u"]), float(r["v"]))
                      for r in recs)
    offset += count * rec_size
    desc = np.frombuffer(blob, dtype="<f4", count=count * ddim,
                         offset=offset).reshape(count, ddim).copy()
    offset += count * ddim * 4
    content_digest = blob[offset:offset + 32].hex()
    seed_digest = blob[offset + 32:offset + 64].hex()
    return LineCloudMap(lines, desc, content_digest, seed_digest, version)


def map_to_json(m: LineCloudMap) -> dict:
    """Sidecar representation; numbers go through repr so the sidecar is
    reproducible but it is not the authoritative serialization."""
    if m.compact:
        lines = [{"direction_index": l.direction_index,
                  "plane_u": l.plane_u, "plane_v": l.plane_v}
                 for l in m.lines]
    else:
        lines = [{"v": list(l.v), "w": list(l.w)} for l in m.lines]
    return {
        "format": "LC3D",
        "version": m.version,
        "mode": MODE_COMPACT if m.compact else MODE_FULL,
        "count": len(m),
        "descriptor_dim": m.descriptor_dim,
        "content_digest": m.content_digest,
        "seed_digest": m.seed_digest,
        "lines": lines,
        "descriptors": m.descriptors.tolist(),
    }


# ---------------------------------------------------------------------------
# descriptor matching


def match_descriptors(query: np.ndarray, m: LineCloudMap,
                      ratio: float = 0.8,
                      observations: Optional[Sequence[Observation2D]] = None,
                      camera_indices: Optional[Sequence[int]] = None):
    """Mutual-nearest-neighbor matching with a Lowe-style ratio test.

    Returns (query_index, map_index) pairs, or ready-made 2D-3D line
    correspondences when `observations` (aligned with the query descriptors)
    is provided.  A match requires each side to be the other's nearest
    neighbor and nearest/second-nearest < ratio; ties break to the lower map
    index.
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError("ratio must lie in (0, 1]")
    query = np.asarray(query, dtype=np.float32)
    if query.ndim != 2:
        raise ValueError("query descriptors must be a 2D array")
    if query.shape[1] != m.descriptor_dim:
        raise DimensionMismatch(
            f"query descriptors have dimension {query.shape[1]}, "
            f"map stores {m.descriptor_dim}")
    if observations is not None and len(observations) != len(query):
        raise ValueError("need exactly one observation per query descriptor")

    d2 = (np.sum(query.astype(np.float64) ** 2, axis=1)[:, None]
          + np.sum(m.descriptors.astype(np.float64) ** 2, axis=1)[None, :]
          - 2.0 * query.astype(np.float64) @ m.descriptors.astype(np.float64).T)
    d2 = np.maximum(d2, 0.0)
    nearest = np.argmin(d2, axis=1)
    map_nearest = np.argmin(d2, axis=0)

    pairs = []
    for qi, mi in enumerate(nearest):
        if map_nearest[mi] != qi:
            continue
        rest = np.delete(d2[qi], mi)
        if rest.size and not np.sqrt(d2[qi, mi]) < ratio * np.sqrt(np.min(rest)):
            continue
        pairs.append((qi, int(mi)))

    if observations is None:
        return pairs
    lines = m.plucker_lines()
    cams = (np.zeros(len(query), dtype=int) if camera_indices is None
            else np.asarray(camera_indices, dtype=int))
    return [Corr2D3D(observations[qi], lines[mi], int(cams[qi]))
            for qi, mi in pairs]
