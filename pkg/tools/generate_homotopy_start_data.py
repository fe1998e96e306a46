"""One-time generator for the frozen continuation start systems.

Total-degree homotopies on generic complex data establish the root counts
(64 for the 6-line incidence system, 16 for the alignment quadrics) and the
corresponding start solutions, which are frozen under src/lineloc/_data/ and
simply continued at runtime.  Rerunning this script regenerates the files
bit-for-bit (fixed seeds).
"""

import json
import pathlib
import sys

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from lineloc.solvers.homotopy import OK, track_paths  # noqa: E402
from lineloc.solvers.line_alignment import (  # noqa: E402
    quadric_jacobian,
    quadric_system,
)
from lineloc.solvers.p6l import (  # noqa: E402
    incidence_jacobian,
    incidence_system,
    pack_params,
)

DATA = ROOT / "src" / "lineloc" / "_data"


def cmplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def total_degree_solve(F, J, p0, degrees, rng, dt0=0.005):
    """Track the total-degree start system gamma*(x_i^d_i - b_i) to F(., p0)."""
    n = len(degrees)
    b = cmplx(rng, n)
    gamma = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))

    def start_roots():
        per_var = []
        for i, d in enumerate(degrees):
            base = np.exp(np.log(b[i]) / d)
            per_var.append(base * np.exp(2j * np.pi * np.arange(d) / d))
        grids = np.meshgrid(*per_var, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    deg = np.array(degrees)

    def H(x, t):
        G = x ** deg[None, :] - b[None, :]
        return (1.0 - t) * gamma * G + t * F(x, p0)

    def Jh(x, t):
        P = x.shape[0]
        JG = np.zeros((P, n, n), dtype=complex)
        idx = np.arange(n)
        JG[:, idx, idx] = deg[None, :] * x ** (deg[None, :] - 1)
        return (1.0 - t) * gamma * JG + t * J(x, p0)

    starts = start_roots()
    print(f"  tracking {len(starts)} total-degree paths ...")
    res = track_paths(H, Jh, starts, dt0=dt0, corrector_iters=4,
                      endgame_iters=40, dt_max=0.05)
    return res


def polish_and_dedupe(F, J, p0, endpoints, iters=30, tol=1e-10):
    kept = []
    for x in endpoints:
        x = x[None].copy()
        for _ in range(iters):
            Fx = F(x, p0)
            try:
                x = x - np.linalg.solve(J(x, p0), Fx[..., None])[..., 0]
            except np.linalg.LinAlgError:
                break
        x = x[0]
        size = np.max(np.abs(x))
        if not np.all(np.isfinite(x)) or size > 1e6:
            continue
        if np.max(np.abs(F(x[None], p0)[0])) > tol * (1.0 + size) ** 3:
            continue
        if any(np.max(np.abs(x - y)) < 1e-8 * (1.0 + np.max(np.abs(y)))
               for y in kept):
            continue
        kept.append(x)
    return np.array(kept)


def save(name, p0, starts):
    DATA.mkdir(parents=True, exist_ok=True)
    payload = {
        "params_re": p0.real.tolist(),
        "params_im": p0.imag.tolist(),
        "starts_re": starts.real.tolist(),
        "starts_im": starts.imag.tolist(),
    }
    path = DATA / name
    path.write_text(json.dumps(payload))
    print(f"  wrote {path} ({len(starts)} starts)")


def collect_roots(F, J, p0, degrees, rng, expect, rounds=5, spurious=None):
    """Union of total-degree runs with independent gamma twists.

    A single run can lose a path near a discriminant crossing; independent
    twists move the crossing, so the union stabilizes at the true count.
    """
    all_roots = []
    for rnd in range(rounds):
        res = total_degree_solve(F, J, p0, degrees, rng)
        finite = res.endpoints[res.status == OK]
        sols = polish_and_dedupe(F, J, p0, np.concatenate(
            [finite] + ([np.array(all_roots)] if all_roots else [])))
        if spurious is not None:
            sols = np.array([x for x in sols if not spurious(x)])
        print(f"  round {rnd + 1}: union has {len(sols)} distinct roots")
        all_roots = list(sols)
        if len(all_roots) == expect:
            break
    return np.array(all_roots)


def bootstrap_p6l():
    print("6-line incidence system (expect 64 roots):")
    rng = np.random.default_rng(612640)
    p0 = pack_params(cmplx(rng, 6, 3), cmplx(rng, 6, 3),
                     cmplx(rng, 6, 3), cmplx(rng, 6, 3))

    # drop the (1 + s.s) = 0 spurious component (complex-only artifact of
    # clearing the Cayley denominator)
    def on_spurious(x):
        return abs(1.0 + x[:3] @ x[:3]) <= 1e-6 * (1.0 + np.max(np.abs(x)) ** 2)

    sols = collect_roots(incidence_system, incidence_jacobian, p0, [3] * 6,
                         rng, expect=64, spurious=on_spurious)
    assert len(sols) == 64, f"expected 64 roots, got {len(sols)}"
    save("p6l_start.json", p0, sols)


def bootstrap_quadrics():
    print("4 generic quadrics in 4 unknowns (expect 16 roots):")
    rng = np.random.default_rng(416160)
    A = cmplx(rng, 4, 4, 4)
    A = 0.5 * (A + np.swapaxes(A, 1, 2))
    b = cmplx(rng, 4, 4)
    c = cmplx(rng, 4)
    from lineloc.solvers.line_alignment import pack_quadrics
    p0 = pack_quadrics(A, b, c)
    sols = collect_roots(quadric_system, quadric_jacobian, p0, [2] * 4,
                         rng, expect=16)
    assert len(sols) == 16, f"expected 16 roots, got {len(sols)}"
    save("quadric_start.json", p0, sols)


if __name__ == "__main__":
    bootstrap_p6l()
    bootstrap_quadrics()
    print("done")
