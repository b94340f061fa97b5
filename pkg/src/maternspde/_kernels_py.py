"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Philox output is bit-identical to the compiled version. Triangular solves go
through scipy and agree with the compiled loops to rounding.
"""

import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import spsolve_triangular

BACKEND = "python"

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)


def _philox_rows(c0, c1, c2, c3, key):
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    k0 = int(key) & 0xFFFFFFFF
    k1 = (int(key) >> 32) & 0xFFFFFFFF
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT, p0 & _MASK
        hi1, lo1 = p1 >> _SHIFT, p1 & _MASK
        c0, c1, c2, c3 = (hi1 ^ c1 ^ np.uint64(k0), lo1,
                          hi0 ^ c3 ^ np.uint64(k1), lo0)
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def philox4x32(counters, key):
    counters = np.asarray(counters, dtype=np.uint32)
    return _philox_rows(counters[:, 0], counters[:, 1], counters[:, 2],
                        counters[:, 3], key)


def philox_lanes(key, stream, n_lanes, blocks, lane_offset=0):
    b, lane = np.meshgrid(np.arange(blocks, dtype=np.uint64),
                          np.arange(n_lanes, dtype=np.uint64) + np.uint64(lane_offset))
    s0 = np.full_like(b, int(stream) & 0xFFFFFFFF)
    s1 = np.full_like(b, (int(stream) >> 32) & 0xFFFFFFFF)
    return _philox_rows(b, lane & _MASK, s0, s1, key).reshape(n_lanes, blocks, 4)


def ic0_factor(indptr, indices, data):
    L = np.array(data, dtype=np.float64)
    n = len(indptr) - 1
    ptr = indptr.tolist()
    idx = indices.tolist()
    vals = L.tolist()
    for i in range(n):
        start, endi = ptr[i], ptr[i + 1] - 1
        for p in range(start, endi):
            j = idx[p]
            s = vals[p]
            pi, pj, endj = start, ptr[j], ptr[j + 1] - 1
            while pi < p and pj < endj:
                ci, cj = idx[pi], idx[pj]
                if ci == cj:
                    s -= vals[pi] * vals[pj]
                    pi += 1
                    pj += 1
                elif ci < cj:
                    pi += 1
                else:
                    pj += 1
            vals[p] = s / vals[endj]
        s = vals[endi]
        for p in range(start, endi):
            s -= vals[p] * vals[p]
        if s <= 0.0:
            return np.array(vals), False
        vals[endi] = math.sqrt(s)
    return np.array(vals), True


def _as_csr(indptr, indices, L):
    n = len(indptr) - 1
    return csr_matrix((L, indices, indptr), shape=(n, n))


def lower_solve(indptr, indices, L, b):
    return spsolve_triangular(_as_csr(indptr, indices, L), b, lower=True)


def upper_solve(indptr, indices, L, b):
    return spsolve_triangular(_as_csr(indptr, indices, L).T.tocsr(), b, lower=False)
