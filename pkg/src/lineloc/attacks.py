"""Adversarial analyses of line-cloud maps.

Two attacks quantify what a published line cloud leaks.  The multi-lifting
attack intersects corresponding lines from two independent liftings of the
same points and recovers every point exactly — the reason a map may be
lifted only once.  The density attack needs just a single cloud: wherever
the original points were sampled densely, unrelated lines pass close to one
another, so clustering the near-intersection midpoints reveals the
underlying geometry.  `score_attack` turns recovered points into
precision/recall against the ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import IdenticalLines, ParallelLifting
from .geometry import PluckerLine
from .mapio import LineCloudMap

_PARALLEL_EPS = 1e-9
DEFAULT_TAU_FRACTION = 0.005     # evaluation radius as a fraction of extent


@dataclass(frozen=True)
class AttackConfig:
    """Knobs of the density attack, all in scene units.

    `pair_radius` caps the closest-approach distance for a line pair to
    count as a candidate intersection; candidates within `cluster_radius`
    merge (single linkage); clusters smaller than `min_cluster_size` are
    discarded as noise.
    """

    pair_radius: float
    cluster_radius: float
    min_cluster_size: int = 2

    def __post_init__(self):
        if self.pair_radius <= 0.0 or self.cluster_radius <= 0.0:
            raise ValueError("radii must be positive")
        if self.min_cluster_size < 2:
            raise ValueError("a cluster needs at least 2 members")


@dataclass(frozen=True)
class AttackReport:
    """Recovered points with per-point scores and optional quality numbers.

    For the density attack the score is the cluster mass (number of merged
    candidate midpoints); for the multi-lifting attack it is the
    closest-approach distance of the pair (smaller = cleaner).  `precision`
    and `recall` are filled in by `scored`; `skipped_identical` and
    `skipped_parallel` list correspondence pairs the multi-lifting attack
    had to skip.
    """

    points: np.ndarray
    scores: np.ndarray
    precision: Optional[float] = None
    recall: Optional[float] = None
    skipped_identical: Tuple[Tuple[int, int], ...] = ()
    skipped_parallel: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        scores = np.asarray(self.scores, dtype=float).reshape(-1)
        if len(pts) != len(scores):
            raise ValueError("need one score per recovered point")
        for value in (self.precision, self.recall):
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError("precision and recall must lie in [0, 1]")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return len(self.points)

    def scored(self, truth: np.ndarray, tau: float) -> "AttackReport":
        """The same report with precision/recall against `truth` filled in."""
        precision, recall = score_attack(self.points, truth, tau)
        return AttackReport(self.points, self.scores, precision, recall,
                            self.skipped_identical, self.skipped_parallel)

    def to_json(self) -> Dict:
        return {
            "points": [[float(c) for c in p] for p in self.points],
            "scores": [float(s) for s in self.scores],
            "precision": self.precision,
            "recall": self.recall,
            "skipped_identical": [list(p) for p in self.skipped_identical],
            "skipped_parallel": [list(p) for p in self.skipped_parallel],
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# the two-line primitive


def closest_approach(L1: PluckerLine, L2: PluckerLine) -> Tuple[np.ndarray, float]:
    """Midpoint of the common perpendicular of two lines and its length.

    For skew lines the distance is the reciprocal product |v1.w2 + v2.w1|
    over ||v1 x v2||.  Parallel but distinct lines return their constant
    offset, with the midpoint halfway between L2's origin-closest point and
    its projection onto L1.  Identical lines admit no meaningful answer.
    """
    cross = np.cross(L1.v, L2.v)
    cn = float(np.linalg.norm(cross))
    o1 = L1.closest_point_to_origin
    o2 = L2.closest_point_to_origin
    if cn < _PARALLEL_EPS:
        offset = L1.distance_to(o2)
        scale = 1.0 + max(np.linalg.norm(o1), np.linalg.norm(o2))
        if offset < _PARALLEL_EPS * scale:
            raise IdenticalLines("the two lines coincide")
        q1 = o1 + float((o2 - o1) @ L1.v) * L1.v
        return 0.5 * (q1 + o2), offset
    recip = abs(float(L1.v @ L2.w + L2.v @ L1.w))
    d = o2 - o1
    a = float(L1.v @ L2.v)
    denom = 1.0 - a * a
    t1 = (float(d @ L1.v) - a * float(d @ L2.v)) / denom
    t2 = (a * float(d @ L1.v) - float(d @ L2.v)) / denom
    p1 = o1 + t1 * L1.v
    p2 = o2 + t2 * L2.v
    return 0.5 * (p1 + p2), recip / cn


# ---------------------------------------------------------------------------
# multi-lifting attack


def multi_lift_attack(cloudA: LineCloudMap, cloudB: LineCloudMap,
                      correspondences: Sequence[Tuple[int, int]]) -> AttackReport:
    """Intersect corresponding lines of two liftings of the same points.

    With exact lines and correct correspondences every point is recovered at
    distance zero.  Pairs whose lines coincide (same lifting seed) or are
    parallel (measure-zero direction collision, or a wrong correspondence
    between parallel lines) are skipped and reported, never fatal.
    """
    linesA = cloudA.plucker_lines()
    linesB = cloudB.plucker_lines()
    points, scores = [], []
    identical, parallel = [], []
    for i, j in correspondences:
        La, Lb = linesA[i], linesB[j]
        if float(np.linalg.norm(np.cross(La.v, Lb.v))) < _PARALLEL_EPS:
            try:
                closest_approach(La, Lb)
            except IdenticalLines:
                identical.append((int(i), int(j)))
            else:
                parallel.append((int(i), int(j)))
            continue
        midpoint, distance = closest_approach(La, Lb)
        points.append(midpoint)
        scores.append(distance)
    return AttackReport(
        np.array(points).reshape(-1, 3), np.array(scores),
        skipped_identical=tuple(identical), skipped_parallel=tuple(parallel))


# ---------------------------------------------------------------------------
# density attack


def _pair_midpoints(lines: Sequence[PluckerLine],
                    pair_radius: float) -> np.ndarray:
    """Closest-approach midpoints of all line pairs closer than pair_radius.

    Streams one line against all later ones, so memory stays linear in the
    number of lines plus the number of accepted pairs.
    """
    n = len(lines)
    V = np.array([l.v for l in lines])
    W = np.array([l.w for l in lines])
    O = np.cross(V, W)
    out: List[np.ndarray] = []
    for i in range(n - 1):
        v1, o1 = V[i], O[i]
        V2, W2, O2 = V[i + 1:], W[i + 1:], O[i + 1:]
        cross = np.cross(v1[None, :], V2)
        cn2 = np.einsum("ij,ij->i", cross, cross)
        recip = np.abs(V2 @ lines[i].w + W2 @ v1)
        skew_mask = cn2 >= _PARALLEL_EPS ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = recip / np.sqrt(cn2)
        near = skew_mask & (dist < pair_radius)
        if np.any(near):
            d = O2[near] - o1
            a = V2[near] @ v1
            denom = cn2[near]          # 1 - a^2 for unit directions
            dv1 = d @ v1
            dv2 = np.einsum("ij,ij->i", d, V2[near])
            t1 = (dv1 - a * dv2) / denom
            t2 = (a * dv1 - dv2) / denom
            mids = 0.5 * (o1 + t1[:, None] * v1
                          + O2[near] + t2[:, None] * V2[near])
            out.append(mids)
        # parallel-but-close pairs fall back to the scalar primitive
        for k in np.flatnonzero(~skew_mask):
            try:
                mid, dist_k = closest_approach(lines[i], lines[i + 1 + k])
            except IdenticalLines:
                continue
            if dist_k < pair_radius:
                out.append(mid[None, :])
    if not out:
        return np.empty((0, 3))
    return np.concatenate(out, axis=0)


def _single_linkage(points: np.ndarray, radius: float) -> np.ndarray:
    """Cluster labels by single linkage over a uniform spatial hash grid.

    Cell edge = radius, so every pair within `radius` lives in the same or
    adjacent cells.  Pairs that pass the distance check become edges of a
    sparse graph; its connected components are the clusters, labelled by
    their smallest member index so the result only depends on the (already
    canonical) input order.
    """
    n = len(points)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    keys = np.floor(points / radius).astype(np.int64)
    keys -= keys.min(axis=0)
    dims = keys.max(axis=0) + 2      # headroom so the +1 offsets stay unique
    lin = (keys[:, 0] * dims[1] + keys[:, 1]) * dims[2] + keys[:, 2]
    order = np.argsort(lin, kind="stable")
    sorted_lin = lin[order]
    starts = np.flatnonzero(np.r_[True, sorted_lin[1:] != sorted_lin[:-1]])
    cells = sorted_lin[starts]
    counts = np.diff(np.r_[starts, n])

    r2 = radius * radius
    edges_i: List[np.ndarray] = []
    edges_j: List[np.ndarray] = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                target = lin + (dx * dims[1] + dy) * dims[2] + dz
                g = np.searchsorted(cells, target)
                ok = np.flatnonzero((g < len(cells))
                                    & (cells[np.minimum(g, len(cells) - 1)]
                                       == target))
                if ok.size == 0:
                    continue
                g = g[ok]
                c = counts[g]
                total = int(c.sum())
                # ragged expansion: point ok[p] against every member of its
                # neighbour cell
                pi = np.repeat(ok, c)
                step = np.arange(total) - np.repeat(np.cumsum(c) - c, c)
                pj = order[np.repeat(starts[g], c) + step]
                keep = pi < pj           # dedup + drop self-pairs
                pi, pj = pi[keep], pj[keep]
                diff = points[pi] - points[pj]
                close = np.einsum("ij,ij->i", diff, diff) <= r2
                edges_i.append(pi[close])
                edges_j.append(pj[close])
    if not edges_i:
        return np.arange(n)
    pi = np.concatenate(edges_i)
    pj = np.concatenate(edges_j)
    graph = coo_matrix((np.ones(len(pi), dtype=bool), (pi, pj)), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    roots = np.full(int(comp.max()) + 1, n, dtype=np.int64)
    np.minimum.at(roots, comp, np.arange(n))
    return roots[comp]


def density_attack(cloud: LineCloudMap, config: AttackConfig) -> AttackReport:
    """Recover densely sampled regions of the discarded points.

    All pairwise near-intersections (closest approach < pair_radius) are
    collected, canonically sorted, merged by single linkage within
    cluster_radius, and every cluster of at least min_cluster_size members
    becomes one recovered point (the cluster centroid) scored by its mass.
    """
    lines = cloud.plucker_lines()
    if len(lines) < 2:
        return AttackReport(np.empty((0, 3)), np.empty(0))
    mids = _pair_midpoints(lines, config.pair_radius)
    if len(mids) == 0:
        return AttackReport(np.empty((0, 3)), np.empty(0))
    # canonical order makes cluster labels independent of pair enumeration
    order = np.lexsort((mids[:, 2], mids[:, 1], mids[:, 0]))
    mids = mids[order]
    labels = _single_linkage(mids, config.cluster_radius)
    _, inverse, sizes = np.unique(labels, return_inverse=True,
                                  return_counts=True)
    sums = np.zeros((len(sizes), 3))
    np.add.at(sums, inverse, mids)
    keep = sizes >= config.min_cluster_size
    if not np.any(keep):
        return AttackReport(np.empty((0, 3)), np.empty(0))
    points = sums[keep] / sizes[keep, None]
    scores = sizes[keep].astype(float)
    # strongest clusters first; ties resolved by coordinates
    order = np.lexsort((points[:, 2], points[:, 1], points[:, 0], -scores))
    return AttackReport(points[order], scores[order])


# ---------------------------------------------------------------------------
# scoring


def score_attack(recovered: np.ndarray, truth: np.ndarray,
                 tau: float) -> Tuple[float, float]:
    """Greedy one-to-one matching within tau -> (precision, recall).

    Each recovered point, in order, claims its nearest unclaimed truth point
    if that lies within tau.  Empty recoveries score precision 0 by
    convention.
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    recovered = np.asarray(recovered, dtype=float).reshape(-1, 3)
    truth = np.asarray(truth, dtype=float).reshape(-1, 3)
    if len(truth) == 0:
        raise ValueError("need at least one truth point")
    if len(recovered) == 0:
        return 0.0, 0.0
    taken = np.zeros(len(truth), dtype=bool)
    matched = 0
    for p in recovered:
        d = np.linalg.norm(truth - p, axis=1)
        d[taken] = np.inf
        j = int(np.argmin(d))
        if d[j] <= tau:
            taken[j] = True
            matched += 1
    return matched / len(recovered), matched / len(truth)
