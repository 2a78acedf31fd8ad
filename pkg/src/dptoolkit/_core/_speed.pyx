# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels. Bit-compatible with dptoolkit._core._pure.

Every reduction uses the same adjacent-pair fold tree as the pure backend
(element 2i added to 2i+1, trailing odd element carried), so outputs are
identical to the last bit. Compiled with -ffp-contract=off to rule out FMA
contraction differences.
"""

from libc.math cimport sqrt, fabs, copysign, INFINITY
from libc.stdlib cimport malloc, free

import numpy as np


cdef void _fold_vector(double* buf, Py_ssize_t n) noexcept nogil:
    # In-place pairwise tree: repeatedly fold adjacent pairs toward the front.
    cdef Py_ssize_t m = n, half, i
    while m > 1:
        half = m // 2
        for i in range(half):
            buf[i] = buf[2 * i] + buf[2 * i + 1]
        if m & 1:
            buf[half] = buf[m - 1]
            m = half + 1
        else:
            m = half


def fold_rows(m):
    """Sum the rows of a 2-d array with the fixed pairwise tree."""
    cdef double[:, ::1] a = np.ascontiguousarray(m, dtype=np.float64)
    cdef Py_ssize_t rows = a.shape[0], cols = a.shape[1]
    out_arr = np.zeros(cols)
    cdef double[::1] out = out_arr
    if rows == 0 or cols == 0:
        return out_arr
    cdef double* work = <double*> malloc(rows * cols * sizeof(double))
    if work == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j, half
    cdef Py_ssize_t nrows = rows
    with nogil:
        for i in range(rows):
            for j in range(cols):
                work[i * cols + j] = a[i, j]
        while nrows > 1:
            half = nrows // 2
            for i in range(half):
                for j in range(cols):
                    work[i * cols + j] = work[2 * i * cols + j] + work[(2 * i + 1) * cols + j]
            if nrows & 1:
                for j in range(cols):
                    work[half * cols + j] = work[(nrows - 1) * cols + j]
                nrows = half + 1
            else:
                nrows = half
        for j in range(cols):
            out[j] = work[j]
    free(work)
    return out_arr


def row_sq_norms(m):
    """Per-row sum of squares, reduced with the fixed pairwise tree."""
    cdef double[:, ::1] a = np.ascontiguousarray(m, dtype=np.float64)
    cdef Py_ssize_t rows = a.shape[0], cols = a.shape[1]
    out_arr = np.zeros(rows)
    cdef double[::1] out = out_arr
    if rows == 0 or cols == 0:
        return out_arr
    cdef double* buf = <double*> malloc(cols * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(rows):
            for j in range(cols):
                buf[j] = a[i, j] * a[i, j]
            _fold_vector(buf, cols)
            out[i] = buf[0]
    free(buf)
    return out_arr


def clipped_fold(m, double clip):
    """Scale each row to l2 norm at most ``clip``, then fold-sum the rows.

    Returns (summed vector, pre-clip row norms). ``clip`` may be +inf.
    """
    cdef double[:, ::1] a = np.ascontiguousarray(m, dtype=np.float64)
    cdef Py_ssize_t rows = a.shape[0], cols = a.shape[1]
    norms_arr = np.sqrt(row_sq_norms(m))
    out_arr = np.zeros(cols)
    cdef double[::1] out = out_arr
    cdef double[::1] norms = norms_arr
    if rows == 0 or cols == 0:
        return out_arr, norms_arr
    cdef double* work = <double*> malloc(rows * cols * sizeof(double))
    if work == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j, half
    cdef Py_ssize_t nrows = rows
    cdef double scale
    with nogil:
        for i in range(rows):
            scale = 1.0
            if clip != INFINITY and norms[i] > clip:
                scale = clip / norms[i]
            for j in range(cols):
                work[i * cols + j] = a[i, j] * scale
        while nrows > 1:
            half = nrows // 2
            for i in range(half):
                for j in range(cols):
                    work[i * cols + j] = work[2 * i * cols + j] + work[(2 * i + 1) * cols + j]
            if nrows & 1:
                for j in range(cols):
                    work[half * cols + j] = work[(nrows - 1) * cols + j]
                nrows = half + 1
            else:
                nrows = half
        for j in range(cols):
            out[j] = work[j]
    free(work)
    return out_arr, norms_arr


def jacobi_sweeps(a_arr, v_arr, double tol, int max_sweeps):
    """Cyclic-by-rows Jacobi diagonalisation, in place; see the pure backend."""
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t n = a.shape[0]
    cdef int sweeps = 0
    cdef Py_ssize_t p, q, k
    cdef double apq, app, aqq, theta, t, c, s, akp, akq, off
    off = _off_norm(a)
    while off > tol and sweeps < max_sweeps:
        with nogil:
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    t = copysign(1.0, theta) / (fabs(theta) + sqrt(theta * theta + 1.0))
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    app = a[p, p]
                    aqq = a[q, q]
                    for k in range(n):
                        akp = a[k, p]
                        akq = a[k, q]
                        a[k, p] = c * akp - s * akq
                        a[k, q] = s * akp + c * akq
                    for k in range(n):
                        a[p, k] = a[k, p]
                        a[q, k] = a[k, q]
                    a[p, p] = app - t * apq
                    a[q, q] = aqq + t * apq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(n):
                        akp = v[k, p]
                        akq = v[k, q]
                        v[k, p] = c * akp - s * akq
                        v[k, q] = s * akp + c * akq
        sweeps += 1
        off = _off_norm(a)
    return off, sweeps


cdef double _off_norm(double[:, ::1] a) noexcept:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q
    cdef double total = 0.0
    with nogil:
        for p in range(n):
            for q in range(n):
                if p != q:
                    total += a[p, q] * a[p, q]
    return sqrt(total)
