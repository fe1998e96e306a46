"""Does requiring positive ray-intersection depth cap the vertical 4-line
solution count at 4 while keeping the truth?"""

import numpy as np

rng = np.random.default_rng(999)

C0 = np.eye(3)
C1 = np.array([[0, -2, 0], [2, 0, 0], [0, 0, 0.0]])
C2 = np.diag([-1.0, -1.0, 1.0])


def rz(th):
    c, s = np.cos(th), np.sin(th)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def make_instance(rig):
    theta = rng.uniform(-np.pi, np.pi)
    T = rng.standard_normal(3)
    R = rz(theta)
    rays, lines, depths = [], [], []
    for _ in range(4):
        X = rng.uniform(-3, 3, 3)
        v = rng.standard_normal(3)
        v /= np.linalg.norm(v)
        w = np.cross(X, v)
        c = rng.standard_normal(3) * (0.3 if rig else 0.0)
        d = R @ X + T - c
        depth = np.linalg.norm(d)
        d /= depth
        rays.append((c, d))
        lines.append((v, w))
        depths.append(depth)
    return theta, T, rays, lines


def ray_depth_at_closest(theta, T, ray, line):
    """Parameter along the oriented ray at the closest approach to the mapped
    line (line mapped into the query frame)."""
    R = rz(theta)
    c, d = ray
    v, w = line
    vq = R @ v
    wq = R @ w + np.cross(T, vq)
    # closest point on ray (c + t d) to line (vq, wq): minimize distance
    # derivative -> standard two-line closest approach along the ray
    oq = np.cross(vq, wq)
    n = np.cross(d, vq)
    nn = n @ n
    if nn < 1e-16:
        return np.inf
    t = np.cross((oq - c), vq) @ n / nn
    return t


def solve(rays, lines):
    Ms = []
    for C in (C0, C1, C2):
        M = np.zeros((4, 4))
        for i, ((c, d), (v, w)) in enumerate(zip(rays, lines)):
            m = np.cross(c, d)
            M[i, :3] = np.cross(C @ v, d)
            M[i, 3] = d @ (C @ w) + m @ (C @ v)
        Ms.append(M)
    qs = np.linspace(-2.0, 2.0, 9)
    vals = [np.linalg.det(Ms[0] + q * Ms[1] + q * q * Ms[2]) for q in qs]
    coef = np.polynomial.polynomial.polyfit(qs, vals, 8)
    sextic, _ = divmod(np.polynomial.Polynomial(coef),
                       np.polynomial.Polynomial([1.0, 0.0, 1.0]))
    roots = sextic.roots()
    real = roots[np.abs(roots.imag) < 1e-8 * (1 + np.abs(roots.real))].real
    sols = []
    for q in real:
        M = Ms[0] + q * Ms[1] + q * q * Ms[2]
        T, *_ = np.linalg.lstsq(M[:, :3], -M[:, 3], rcond=None)
        theta = 2.0 * np.arctan(q)
        R = rz(theta)
        res = max(abs((np.cross(R @ lines[i][0], rays[i][1])) @ T
                      + rays[i][1] @ (R @ lines[i][1])
                      + (np.cross(*rays[i])) @ (R @ lines[i][0]))
                  for i in range(4))
        if res < 1e-6:
            sols.append((theta, T))
    return sols


for rig in (False, True):
    counts = {}
    misses = 0
    truth_cheir_fail = 0
    for _ in range(3000):
        theta, T, rays, lines = make_instance(rig)
        sols = solve(rays, lines)
        kept = []
        for th, Tc in sols:
            depths = [ray_depth_at_closest(th, Tc, r, l) for r, l in zip(rays, lines)]
            if all(t > 0 for t in depths):
                kept.append((th, Tc))
        counts[len(kept)] = counts.get(len(kept), 0) + 1
        found = any(abs(np.arctan2(np.sin(th - theta), np.cos(th - theta))) < 1e-6
                    and np.linalg.norm(Tc - T) < 1e-5 for th, Tc in kept)
        if not found:
            misses += 1
            tr_in_all = any(abs(np.arctan2(np.sin(th - theta), np.cos(th - theta))) < 1e-6
                            for th, Tc in sols)
            if tr_in_all:
                truth_cheir_fail += 1
    label = "rig" if rig else "central"
    mean = sum(k * v for k, v in counts.items()) / 3000
    print(f"{label}: kept-count histogram {dict(sorted(counts.items()))}  mean {mean:.2f}")
    print(f"   truth missed {misses} (of which cheirality removed truth: {truth_cheir_fail})")
