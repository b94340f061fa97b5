"""Both kernel backends against known answers and each other."""

import numpy as np
import pytest
import scipy.sparse as sp

from maternspde import _kernels_py, kernels
from maternspde.fem import assemble_mass, assemble_stiffness
from maternspde.mesh import rectangle

try:
    from maternspde import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

BACKENDS = [_kernels_py] + ([_kernels_c] if _kernels_c is not None else [])

# Random123 known-answer vectors for Philox4x32-10
KAT = [
    ((0, 0, 0, 0), 0, (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, 0xFFFFFFFFFFFFFFFF, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), 0x299F31D0A4093822,
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda k: k.BACKEND)
@pytest.mark.parametrize("counter,key,expected", KAT)
def test_philox_known_answers(impl, counter, key, expected):
    out = impl.philox4x32(np.array([counter], dtype=np.uint32), key)
    assert tuple(int(v) for v in out[0]) == expected


@pytest.mark.skipif(_kernels_c is None, reason="compiled extension not built")
def test_philox_lanes_bit_identical():
    a = _kernels_py.philox_lanes(99, 2 ** 40 + 3, 50, 3, lane_offset=7)
    b = _kernels_c.philox_lanes(99, 2 ** 40 + 3, 50, 3, lane_offset=7)
    np.testing.assert_array_equal(a, b)


def _lower(cells=10):
    m = rectangle(cells, cells)
    A = (assemble_mass(m) + assemble_stiffness(m, scale=0.1)).csr
    low = sp.tril(A, format="csr")
    low.sort_indices()
    return A, low.indptr.astype(np.int64), low.indices.astype(np.int64), low.data.copy()


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda k: k.BACKEND)
def test_ic0_on_tridiagonal_is_exact(impl):
    # no fill-in for a tridiagonal matrix, so IC(0) is the exact Cholesky factor
    n = 6
    A = sp.diags([-1.0, 2.5, -1.0], [-1, 0, 1], shape=(n, n), format="csr")
    low = sp.tril(A, format="csr")
    L, ok = impl.ic0_factor(low.indptr.astype(np.int64), low.indices.astype(np.int64),
                            low.data.copy())
    assert ok
    Lmat = sp.csr_matrix((L, low.indices, low.indptr), shape=(n, n)).toarray()
    np.testing.assert_allclose(Lmat, np.linalg.cholesky(A.toarray()), atol=1e-14)


@pytest.mark.skipif(_kernels_c is None, reason="compiled extension not built")
def test_backends_agree_on_factor_and_solves(rng):
    _, indptr, indices, data = _lower()
    Lp, _ = _kernels_py.ic0_factor(indptr, indices, data)
    Lc, _ = _kernels_c.ic0_factor(indptr, indices, data)
    np.testing.assert_allclose(Lp, Lc, rtol=1e-13)
    b = rng.standard_normal(len(indptr) - 1)
    for name in ("lower_solve", "upper_solve"):
        np.testing.assert_allclose(getattr(_kernels_py, name)(indptr, indices, Lp, b),
                                   getattr(_kernels_c, name)(indptr, indices, Lp, b),
                                   rtol=1e-12)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda k: k.BACKEND)
def test_triangular_solves_invert_factor(impl, rng):
    _, indptr, indices, data = _lower(6)
    L, _ = impl.ic0_factor(indptr, indices, data)
    n = len(indptr) - 1
    Lmat = sp.csr_matrix((L, indices, indptr), shape=(n, n))
    b = rng.standard_normal(n)
    np.testing.assert_allclose(Lmat @ impl.lower_solve(indptr, indices, L, b), b, atol=1e-12)
    np.testing.assert_allclose(Lmat.T @ impl.upper_solve(indptr, indices, L, b), b, atol=1e-12)
