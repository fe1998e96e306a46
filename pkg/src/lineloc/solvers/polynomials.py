"""Univariate elimination helpers shared by the minimal solvers.

All eliminants in this package are determinants of small matrix polynomials;
they are recovered by evaluating the determinant numerically on a Chebyshev
node grid (batched), fitting the known-degree polynomial, and root-finding on
the companion matrix.  Roots only need to land inside the Newton basin of the
exact constraint system -- every solver polishes on its original equations.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np


def cheb_nodes(n: int, halfwidth: float) -> np.ndarray:
    k = np.arange(n)
    return halfwidth * np.cos((2 * k + 1) * np.pi / (2 * n))


def fit_power_coeffs(xs: np.ndarray, ys: np.ndarray, degree: int) -> np.ndarray:
    """Least-squares power-basis coefficients (ascending) of a sampled
    polynomial of known degree."""
    return np.polynomial.polynomial.polyfit(xs, ys, degree)


def real_roots(coeffs_ascending: np.ndarray,
               imag_tol: float = 1e-8,
               trim_rel: float = 1e-12) -> np.ndarray:
    """Real roots of a power-basis polynomial via companion eigenvalues.

    A root is accepted as real when |imag| < imag_tol * (1 + |real|).
    Leading coefficients smaller than trim_rel * max|c| are trimmed first
    (they produce meaningless huge roots).
    """
    c = np.asarray(coeffs_ascending, dtype=float)
    if c.size == 0:
        return np.array([])
    top = np.max(np.abs(c))
    if top == 0.0:
        return np.array([])
    last = c.size - 1
    while last > 0 and abs(c[last]) < trim_rel * top:
        last -= 1
    c = c[:last + 1]
    if c.size <= 1:
        return np.array([])
    roots = np.polynomial.polynomial.polyroots(c)
    keep = np.abs(roots.imag) < imag_tol * (1.0 + np.abs(roots.real))
    return np.unique(roots[keep].real)


def quadratic_real_roots(c0: float, c1: float, c2: float,
                         imag_tol: float = 1e-8) -> np.ndarray:
    """Real roots of c2 x^2 + c1 x + c0 (numerically stable form)."""
    if abs(c2) < 1e-14 * max(1.0, abs(c1), abs(c0)):
        if c1 == 0.0:
            return np.array([])
        return np.array([-c0 / c1])
    disc = c1 * c1 - 4.0 * c2 * c0
    scale = max(abs(c0), abs(c1), abs(c2))
    if disc < 0.0:
        # reject clearly complex pairs; keep near-double roots
        if abs(disc) > (imag_tol * scale) ** 2 * 4.0:
            return np.array([])
        disc = 0.0
    sq = np.sqrt(disc)
    q = -0.5 * (c1 + np.copysign(sq, c1 if c1 != 0.0 else 1.0))
    roots = [q / c2]
    if q != 0.0:
        roots.append(c0 / q)
    else:
        roots.append(-c1 / c2 - roots[0])
    return np.unique(np.array(roots))


def det_eliminant_roots(matrix_at: Callable[[np.ndarray], np.ndarray],
                        degree: int,
                        halfwidth: float,
                        deflate_one_plus_x2: int = 0,
                        imag_tol: float = 1e-8) -> np.ndarray:
    """Real roots of det(M(x)) for a matrix polynomial M.

    `matrix_at(xs)` must return the stacked matrices (len(xs), k, k).  The
    determinant (degree `degree`) is sampled on 2*degree+1 Chebyshev nodes and
    fitted; `deflate_one_plus_x2` copies of the root-free factor (1 + x^2) are
    divided out before root-finding.
    """
    xs = cheb_nodes(2 * degree + 1, halfwidth)
    dets = np.linalg.det(matrix_at(xs))
    coeffs = fit_power_coeffs(xs, dets, degree)
    for _ in range(deflate_one_plus_x2):
        coeffs, rem = np.polynomial.polynomial.polydiv(coeffs, [1.0, 0.0, 1.0])
        # remainder must be fit noise; a large remainder signals a bad factor
        top = max(1e-300, np.max(np.abs(coeffs)))
        if np.max(np.abs(rem)) > 1e-6 * top:
            raise ArithmeticError("expected polynomial factor is absent")
    return real_roots(coeffs, imag_tol=imag_tol)


def newton_polish(fun: Callable[[np.ndarray], np.ndarray],
                  jac: Callable[[np.ndarray], np.ndarray],
                  x0: np.ndarray,
                  iters: int = 4,
                  tol: float = 1e-14) -> Optional[np.ndarray]:
    """A few damped Newton steps on a square system; returns None if the
    iteration blows up (singular Jacobian or divergence)."""
    x = np.array(x0, dtype=float)
    f = fun(x)
    best = float(np.linalg.norm(f))
    for _ in range(iters):
        if best < tol:
            break
        try:
            step = np.linalg.solve(jac(x), -f)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        for _ in range(6):
            xn = x + lam * step
            fn = fun(xn)
            nrm = float(np.linalg.norm(fn))
            if nrm < best:
                x, f, best = xn, fn, nrm
                break
            lam *= 0.5
        else:
            break
        if not np.all(np.isfinite(x)):
            return None
    return x
