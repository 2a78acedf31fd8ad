"""Pure NumPy kernels; reference implementation for the compiled backend.

All reductions use the same fixed adjacent-pair fold: level after level,
element 2i is added to element 2i+1 and a trailing odd element passes
through unchanged. The order never depends on values or on parallel
scheduling, so results are reproducible bit for bit, and the compiled
backend replicates the exact same tree.
"""

from __future__ import annotations

import math

import numpy as np


def fold_rows(m: np.ndarray) -> np.ndarray:
    """Sum the rows of a 2-d array with the fixed pairwise tree."""
    m = np.ascontiguousarray(m, dtype=np.float64)
    if m.shape[0] == 0:
        return np.zeros(m.shape[1])
    while m.shape[0] > 1:
        even = m[0::2].copy()
        odd = m[1::2]
        even[: odd.shape[0]] += odd
        m = even
    return m[0]


def row_sq_norms(m: np.ndarray) -> np.ndarray:
    """Per-row sum of squares, reduced with the fixed pairwise tree."""
    w = np.ascontiguousarray(m, dtype=np.float64) ** 2
    if w.shape[1] == 0:
        return np.zeros(w.shape[0])
    while w.shape[1] > 1:
        even = w[:, 0::2].copy()
        odd = w[:, 1::2]
        even[:, : odd.shape[1]] += odd
        w = even
    return w[:, 0]


def clipped_fold(m: np.ndarray, clip: float) -> tuple[np.ndarray, np.ndarray]:
    """Scale each row to l2 norm at most ``clip``, then fold-sum the rows.

    Returns (summed vector, pre-clip row norms). ``clip`` may be +inf.
    """
    m = np.ascontiguousarray(m, dtype=np.float64)
    norms = np.sqrt(row_sq_norms(m))
    if math.isinf(clip):
        return fold_rows(m), norms
    scale = np.ones_like(norms)
    over = norms > clip
    scale[over] = clip / norms[over]
    return fold_rows(m * scale[:, None]), norms


def jacobi_sweeps(a: np.ndarray, v: np.ndarray, tol: float, max_sweeps: int) -> tuple[float, int]:
    """Cyclic-by-rows Jacobi diagonalisation, in place.

    ``a`` is a symmetric matrix that converges to a diagonal one; ``v``
    accumulates the rotations (columns become eigenvectors). Stops when the
    off-diagonal Frobenius norm drops to ``tol`` or after ``max_sweeps``.
    Returns (final off-diagonal norm, sweeps used).
    """
    n = a.shape[0]
    sweeps = 0
    off = _off_norm(a)
    while off > tol and sweeps < max_sweeps:
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                app = a[p, p]
                aqq = a[q, q]
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                new_p = c * col_p - s * col_q
                new_q = s * col_p + c * col_q
                a[:, p] = new_p
                a[:, q] = new_q
                a[p, :] = new_p
                a[q, :] = new_q
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        sweeps += 1
        off = _off_norm(a)
    return off, sweeps


def _off_norm(a: np.ndarray) -> float:
    d = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(d * d)))
