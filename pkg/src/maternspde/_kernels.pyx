# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: Philox4x32-10 blocks, IC(0) factorization, triangular solves.

Each function has a pure-Python twin in ``_kernels_py`` with identical
results; ``maternspde.kernels`` picks one at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from libc.stdint cimport uint32_t, uint64_t, int64_t

cnp.import_array()

BACKEND = "cython"

cdef uint32_t PHILOX_M0 = 0xD2511F53u
cdef uint32_t PHILOX_M1 = 0xCD9E8D57u
cdef uint32_t PHILOX_W0 = 0x9E3779B9u
cdef uint32_t PHILOX_W1 = 0xBB67AE85u


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t hi0, lo0, hi1, lo1
    cdef int r
    for r in range(10):
        p0 = <uint64_t>PHILOX_M0 * c[0]
        p1 = <uint64_t>PHILOX_M1 * c[2]
        hi0 = <uint32_t>(p0 >> 32)
        lo0 = <uint32_t>p0
        hi1 = <uint32_t>(p1 >> 32)
        lo1 = <uint32_t>p1
        c[0] = hi1 ^ c[1] ^ k0
        c[1] = lo1
        c[2] = hi0 ^ c[3] ^ k1
        c[3] = lo0
        k0 = k0 + PHILOX_W0
        k1 = k1 + PHILOX_W1


def philox4x32(cnp.uint32_t[:, ::1] counters, uint64_t key):
    """Apply Philox4x32-10 to each row of ``counters`` under the 64-bit ``key``."""
    cdef Py_ssize_t m = counters.shape[0], i
    out = np.empty((m, 4), dtype=np.uint32)
    cdef cnp.uint32_t[:, ::1] o = out
    cdef uint32_t c[4]
    cdef uint32_t k0 = <uint32_t>(key & 0xFFFFFFFFu), k1 = <uint32_t>(key >> 32)
    with nogil:
        for i in range(m):
            c[0] = counters[i, 0]
            c[1] = counters[i, 1]
            c[2] = counters[i, 2]
            c[3] = counters[i, 3]
            _philox(c, k0, k1)
            o[i, 0] = c[0]
            o[i, 1] = c[1]
            o[i, 2] = c[2]
            o[i, 3] = c[3]
    return out


def philox_lanes(uint64_t key, uint64_t stream, Py_ssize_t n_lanes, Py_ssize_t blocks,
                 uint32_t lane_offset=0):
    """Random words for counters ``(block, lane_offset + lane, stream_lo, stream_hi)``.

    Returns a ``(n_lanes, blocks, 4)`` uint32 array.
    """
    out = np.empty((n_lanes, blocks, 4), dtype=np.uint32)
    cdef cnp.uint32_t[:, :, ::1] o = out
    cdef uint32_t c[4]
    cdef uint32_t k0 = <uint32_t>(key & 0xFFFFFFFFu), k1 = <uint32_t>(key >> 32)
    cdef uint32_t s0 = <uint32_t>(stream & 0xFFFFFFFFu), s1 = <uint32_t>(stream >> 32)
    cdef Py_ssize_t lane, b
    with nogil:
        for lane in range(n_lanes):
            for b in range(blocks):
                c[0] = <uint32_t>b
                c[1] = <uint32_t>(lane_offset + lane)
                c[2] = s0
                c[3] = s1
                _philox(c, k0, k1)
                o[lane, b, 0] = c[0]
                o[lane, b, 1] = c[1]
                o[lane, b, 2] = c[2]
                o[lane, b, 3] = c[3]
    return out


def ic0_factor(const int64_t[::1] indptr, const int64_t[::1] indices,
               const double[::1] data):
    """Zero-fill incomplete Cholesky of a lower-triangular CSR pattern.

    Columns must be sorted per row with the diagonal stored last. Returns
    ``(values, ok)``; ``ok`` is False on a non-positive pivot.
    """
    cdef Py_ssize_t n = indptr.shape[0] - 1
    out = np.array(data, dtype=np.float64, copy=True)
    cdef double[::1] L = out
    cdef Py_ssize_t i, p, j, pi, pj, endi, endj, ci, cj
    cdef double s, piv
    cdef bint ok = True
    with nogil:
        for i in range(n):
            endi = indptr[i + 1] - 1
            for p in range(indptr[i], endi):
                j = indices[p]
                s = L[p]
                pi = indptr[i]
                pj = indptr[j]
                endj = indptr[j + 1] - 1
                while pi < p and pj < endj:
                    ci = indices[pi]
                    cj = indices[pj]
                    if ci == cj:
                        s -= L[pi] * L[pj]
                        pi += 1
                        pj += 1
                    elif ci < cj:
                        pi += 1
                    else:
                        pj += 1
                L[p] = s / L[endj]
            s = L[endi]
            for p in range(indptr[i], endi):
                s -= L[p] * L[p]
            if s <= 0.0:
                ok = False
                break
            L[endi] = sqrt(s)
    return out, bool(ok)


def lower_solve(const int64_t[::1] indptr, const int64_t[::1] indices,
                const double[::1] L, const double[::1] b):
    """Solve ``L x = b`` for lower-triangular CSR ``L`` (diagonal last per row)."""
    cdef Py_ssize_t n = indptr.shape[0] - 1, i, p, endi
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] x = out
    cdef double s
    with nogil:
        for i in range(n):
            endi = indptr[i + 1] - 1
            s = b[i]
            for p in range(indptr[i], endi):
                s -= L[p] * x[indices[p]]
            x[i] = s / L[endi]
    return out


def upper_solve(const int64_t[::1] indptr, const int64_t[::1] indices,
                const double[::1] L, const double[::1] b):
    """Solve ``L^T x = b`` using the CSR storage of ``L``."""
    cdef Py_ssize_t n = indptr.shape[0] - 1, i, p, endi
    out = np.array(b, dtype=np.float64, copy=True)
    cdef double[::1] x = out
    cdef double xi
    with nogil:
        for i in range(n - 1, -1, -1):
            endi = indptr[i + 1] - 1
            xi = x[i] / L[endi]
            x[i] = xi
            for p in range(indptr[i], endi):
                x[indices[p]] -= L[p] * xi
    return out
