"""Benchmark harness: localize synthetic groups, sweep noise or density.

Every run of `run_sweep` produces one row per (level, method, trial) with
the schema `level,method,trial,dR_deg,dT,inlier_ratio,iterations,time_ms,
status`; solver failures become rows with status set to the error class
name instead of aborting the sweep.
"""

from __future__ import annotations

import csv
import dataclasses
import time
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import LinelocError
from .geometry import RigCalibration
from .refine import RefineConfig, refine_pose
from .residuals import ResidualModel
from .robust import RansacConfig, cost_kind_for, ransac
from .solvers import get_problem
from .synthetic import QueryGroup, SceneConfig, generate_scene, pose_errors

SWEEP_COLUMNS = ("level", "method", "trial", "dR_deg", "dT",
                 "inlier_ratio", "iterations", "time_ms", "status")

DEFAULT_NOISE_GRID = (0.0, 0.5, 1.0, 2.0, 4.0)   # pixels
DEFAULT_DENSITY_GRID = (1.0, 0.5, 0.2, 0.1, 0.05)  # retained fraction


def localize_group(group: QueryGroup, method: str, *,
                   threshold_px: float = 4.0,
                   focal: float = 500.0,
                   threshold_units: Optional[float] = None,
                   seed: int = 0,
                   max_iterations: int = 2000,
                   min_iterations: int = 10,
                   refine: bool = True,
                   keep: Optional[np.ndarray] = None):
    """Run RANSAC (+ refinement) for one method on one query group.

    `keep` optionally restricts the correspondences to map entries that
    survived a density cut.  3D alignment problems measure residuals in
    scene units, so their threshold defaults to the reprojection threshold
    scaled by a nominal 10-unit depth.
    """
    prob = get_problem(method)
    corrs = list(group.corrs(prob.corr_type, prob.target))
    indices = group.point_indices
    if prob.name in ("p3p", "p2p+u"):
        # central-camera methods see only the reference camera's observations
        sel = [i for i, c in enumerate(corrs) if c.camera_index == 0]
        corrs = [corrs[i] for i in sel]
        indices = indices[sel]
    if keep is not None:
        kept = set(np.flatnonzero(keep))
        corrs = [c for c, pi in zip(corrs, indices) if pi in kept]
    if prob.corr_type == "2d3d":
        threshold = threshold_px / focal
        rig = (RigCalibration.single() if prob.name in ("p3p", "p2p+u")
               else group.rig)
    else:
        threshold = (threshold_units if threshold_units is not None
                     else 10.0 * threshold_px / focal)
        rig = None
    gravity = group.gravity() if prob.needs_gravity else None
    config = RansacConfig(threshold=threshold, seed=seed,
                          max_iterations=max_iterations,
                          min_iterations=min_iterations)
    est = ransac(prob, corrs, rig=rig, gravity=gravity, config=config)
    if refine:
        kind = cost_kind_for(prob)
        model = ResidualModel(kind, corrs, rig)
        # refine, then re-score: a rough minimal-sample pose often misses
        # genuine inliers, so grow the consensus set and refine once more
        for _ in range(3):
            est = refine_pose(est, corrs, rig=rig, cost_kind=kind,
                              config=RefineConfig())
            mask = model.distances(est.pose) <= threshold
            if np.array_equal(mask, est.inlier_mask):
                break
            est = replace(est, inlier_mask=mask,
                          inlier_ratio=float(mask.mean()))
    return est


def _trial_seed(seed: int, level_index: int, trial: int) -> int:
    return int(np.random.default_rng((seed, level_index, trial)).integers(2**63))


def run_sweep(kind: str,
              grid: Sequence[float],
              methods: Sequence[str],
              trials: int,
              seed: int = 0,
              base: Optional[SceneConfig] = None,
              threshold_px: float = 4.0,
              max_iterations: int = 2000,
              refine: bool = True) -> List[Dict]:
    """Noise or density sweep over synthetic scenes; returns tidy rows.

    kind="noise": grid entries are pixel noise sigmas. kind="density":
    grid entries are retained map fractions (the scene itself uses the
    base config's noise).  Each (level, trial) pair gets its own scene
    seed derived from `seed`, shared across methods for comparability.
    """
    if kind not in ("noise", "density"):
        raise ValueError("kind must be 'noise' or 'density'")
    if len(grid) == 0 or len(methods) == 0:
        raise ValueError("grid and methods must be nonempty")
    if trials < 1:
        raise ValueError("need at least one trial")
    for m in methods:
        get_problem(m)
    base = base or SceneConfig()

    rows = []
    for li, level in enumerate(grid):
        for trial in range(trials):
            scene_seed = _trial_seed(seed, li, trial)
            cfg = dataclasses.replace(base, seed=scene_seed)
            if kind == "noise":
                cfg = dataclasses.replace(cfg, pixel_noise_sigma=float(level))
            instance = generate_scene(cfg)
            group = instance.groups[0]
            keep = None
            if kind == "density":
                keep_rng = np.random.default_rng((scene_seed, 1))
                keep = keep_rng.uniform(size=len(instance.points)) < float(level)
            for method in methods:
                rows.append(_run_one(group, method, level, trial,
                                     threshold_px=threshold_px,
                                     focal=base.focal,
                                     seed=scene_seed,
                                     max_iterations=max_iterations,
                                     refine=refine, keep=keep))
    rows.sort(key=lambda r: (r["level"], r["method"], r["trial"]))
    return rows


def _run_one(group, method, level, trial, **kw) -> Dict:
    t0 = time.perf_counter()
    try:
        est = localize_group(group, method, threshold_px=kw["threshold_px"],
                             focal=kw["focal"], seed=kw["seed"],
                             max_iterations=kw["max_iterations"],
                             refine=kw["refine"], keep=kw["keep"])
        err = pose_errors(est.pose, group.body_pose)
        status = "ok"
        dR, dT = err.dR_deg, err.dT
        ratio, iters = est.inlier_ratio, est.iterations_run
    except LinelocError as exc:
        status = type(exc).__name__
        dR = dT = ratio = float("nan")
        iters = 0
    ms = 1e3 * (time.perf_counter() - t0)
    return {"level": level, "method": method, "trial": trial,
            "dR_deg": dR, "dT": dT, "inlier_ratio": ratio,
            "iterations": iters, "time_ms": ms, "status": status}


def rows_to_csv(rows: Sequence[Dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in SWEEP_COLUMNS})


def median_errors(rows: Sequence[Dict]) -> Dict:
    """Per (level, method): median dR_deg/dT over successful trials, plus
    the success count; failed rows count toward the denominator only."""
    out = {}
    keys = sorted({(r["level"], r["method"]) for r in rows})
    for level, method in keys:
        sel = [r for r in rows if r["level"] == level and r["method"] == method]
        ok = [r for r in sel if r["status"] == "ok"]
        out[(level, method)] = {
            "median_dR_deg": float(np.median([r["dR_deg"] for r in ok]))
            if ok else float("nan"),
            "median_dT": float(np.median([r["dT"] for r in ok]))
            if ok else float("nan"),
            "num_ok": len(ok),
            "num_total": len(sel),
        }
    return out
