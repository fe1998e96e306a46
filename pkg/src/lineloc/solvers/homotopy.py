"""Batched polynomial path tracking (predictor/corrector over a common grid).

Used by the 6-line minimal solver and the unknown-scale point-to-line
alignment, both of which track the solutions of a frozen generic complex
start system along a straight parameter segment to the target system.  All
paths advance on a shared t-grid with a globally adaptive step; paths that
cannot be corrected at the minimum step are frozen and reported, and paths
that blow up are marked divergent (expected for total-degree bootstraps).
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

OK = 0
DIVERGED = 1
FAILED = 2


class TrackResult(NamedTuple):
    endpoints: np.ndarray   # (P, n) complex
    status: np.ndarray      # (P,) int: OK / DIVERGED / FAILED


def _newton_delta(Jm: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Batched -J^-1 F with per-path fallback on singular members."""
    try:
        return np.linalg.solve(Jm, -F[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(F)
        for k in range(F.shape[0]):
            try:
                out[k] = np.linalg.solve(Jm[k], -F[k])
            except np.linalg.LinAlgError:
                out[k] = np.nan
        return out


def track_paths(H: Callable[[np.ndarray, float], np.ndarray],
                J: Callable[[np.ndarray, float], np.ndarray],
                starts: np.ndarray,
                dt0: float = 0.02,
                dt_min: float = 1e-7,
                dt_max: float = 0.1,
                corrector_tol: float = 1e-8,
                corrector_iters: int = 3,
                endgame_iters: int = 20,
                endgame_tol: float = 1e-11,
                blowup: float = 1e9) -> TrackResult:
    """Continue the solutions `starts` of H(., 0) = 0 to t = 1.

    H(x, t) evaluates the homotopy batched over paths ((P, n) -> (P, n),
    complex); J is its x-Jacobian ((P, n, n)).  Secant prediction, Newton
    correction; a step is accepted only when every active path converges,
    otherwise the step is halved.  At the minimum step the stragglers are
    frozen as FAILED so the rest can continue.
    """
    x = np.array(starts, dtype=complex)
    P, _ = x.shape
    status = np.full(P, OK)
    active = np.ones(P, dtype=bool)
    t = 0.0
    x_prev = None
    t_prev = None
    dt = dt0
    streak = 0

    while t < 1.0 and np.any(active):
        dt = min(dt, 1.0 - t)
        t_new = t + dt
        if x_prev is None:
            x_pred = x.copy()
        else:
            x_pred = x + (x - x_prev) * (dt / (t - t_prev))
        x_try = x_pred.copy()
        for it in range(corrector_iters + 1):
            F = H(x_try, t_new)
            resid = np.max(np.abs(F), axis=1)
            size = np.max(np.abs(x_try), axis=1)
            conv = np.isfinite(resid) & (resid < corrector_tol * (1.0 + size))
            grown = size > blowup
            if it == corrector_iters or np.all(conv[active] | grown[active]):
                break
            bad = ~np.isfinite(F).all(axis=1)
            F[bad] = 0.0
            x_try += np.where(active[:, None] & ~bad[:, None],
                              _newton_delta(J(x_try, t_new), F), 0.0)

        if np.all(conv[active] | grown[active]) or dt <= dt_min:
            # accept; at the minimum step freeze whoever still fails
            newly_diverged = active & grown
            newly_failed = active & ~conv & ~grown
            if dt > dt_min:
                newly_failed[:] = False
            status[newly_diverged] = DIVERGED
            status[newly_failed] = FAILED
            active &= ~(newly_diverged | newly_failed)
            keep = ~active
            x_try[keep] = x[keep]
            x_prev, t_prev = x, t
            x, t = x_try, t_new
            streak += 1
            if streak >= 3:
                dt = min(dt * 1.5, dt_max)
        else:
            dt = max(dt * 0.5, dt_min * 0.5)
            streak = 0

    # endgame: sharpen the survivors on the target system
    for _ in range(endgame_iters):
        if not np.any(active):
            break
        F = H(x, 1.0)
        F[~np.isfinite(F).all(axis=1)] = 0.0
        delta = _newton_delta(J(x, 1.0), F)
        x = np.where(active[:, None] & np.isfinite(delta).all(axis=1)[:, None],
                     x + delta, x)
    if np.any(active):
        F = np.max(np.abs(H(x, 1.0)), axis=1)
        size = np.max(np.abs(x), axis=1)
        sharp = np.isfinite(F) & (F < endgame_tol * (1.0 + size) ** 2 * 1e3)
        status[active & ~sharp & (size > blowup)] = DIVERGED
        status[active & ~sharp & (size <= blowup)] = FAILED
    return TrackResult(x, status)


def parameter_homotopy(F: Callable[[np.ndarray, np.ndarray], np.ndarray],
                       Jx: Callable[[np.ndarray, np.ndarray], np.ndarray],
                       p0: np.ndarray,
                       p1: np.ndarray,
                       starts: np.ndarray,
                       **kwargs) -> TrackResult:
    """Track from the solutions of F(., p0) to those of F(., p1) along the
    straight parameter segment."""
    p0 = np.asarray(p0, dtype=complex)
    p1 = np.asarray(p1, dtype=complex)

    def H(x, t):
        return F(x, (1.0 - t) * p0 + t * p1)

    def J(x, t):
        return Jx(x, (1.0 - t) * p0 + t * p1)

    return track_paths(H, J, starts, **kwargs)


def real_endpoints(result: TrackResult,
                   imag_tol: float = 1e-6) -> np.ndarray:
    """Real-valued endpoints of successfully tracked paths (deduplicated
    downstream by the callers)."""
    out = []
    for x, st in zip(result.endpoints, result.status):
        if st != OK:
            continue
        if np.all(np.abs(x.imag) < imag_tol * (1.0 + np.abs(x.real))):
            out.append(x.real.copy())
    return np.array(out) if out else np.empty((0, result.endpoints.shape[1]))
