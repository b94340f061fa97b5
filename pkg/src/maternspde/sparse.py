"""Symmetric sparse matrices, preconditioned CG and spectral-interval estimation."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .errors import ConfigurationError, NotSPDError, SolverError

log = logging.getLogger(__name__)

DEFAULT_CG_TOL = 1e-10


class SparseSymMatrix:
    """Symmetric matrix in compressed-row storage of the full pattern.

    Wraps a canonical ``scipy.sparse.csr_matrix`` (sorted column indices, no
    duplicates). Symmetry is checked on construction unless ``check=False``.
    """

    def __init__(self, matrix, check: bool = True):
        A = sp.csr_matrix(matrix, dtype=np.float64)
        A.sum_duplicates()
        A.sort_indices()
        if A.shape[0] != A.shape[1]:
            raise ConfigurationError(f"matrix must be square, got {A.shape}")
        if check:
            scale = abs(A).max() if A.nnz else 0.0
            diff = A - A.T
            if diff.nnz and abs(diff).max() > 1e-12 * scale:
                raise ConfigurationError("matrix is not symmetric")
        self.csr = A

    @classmethod
    def from_dense(cls, a) -> "SparseSymMatrix":
        return cls(sp.csr_matrix(np.asarray(a, dtype=float)))

    @classmethod
    def identity(cls, n: int) -> "SparseSymMatrix":
        return cls(sp.identity(n, format="csr"), check=False)

    @property
    def n(self) -> int:
        return self.csr.shape[0]

    @property
    def shape(self):
        return self.csr.shape

    @property
    def indptr(self):
        return self.csr.indptr

    @property
    def indices(self):
        return self.csr.indices

    @property
    def data(self):
        return self.csr.data

    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()

    def __matmul__(self, x):
        return self.csr @ x

    def __add__(self, other):
        return SparseSymMatrix(self.csr + _csr(other), check=False)

    def __mul__(self, c: float):
        return SparseSymMatrix(self.csr * float(c), check=False)

    __rmul__ = __mul__

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def __repr__(self):
        return f"SparseSymMatrix(n={self.n}, nnz={self.csr.nnz})"


def _csr(A):
    return A.csr if isinstance(A, SparseSymMatrix) else sp.csr_matrix(A)


class JacobiPreconditioner:
    name = "jacobi"

    def __init__(self, A: SparseSymMatrix):
        d = A.diagonal()
        if np.any(d <= 0):
            raise NotSPDError("non-positive diagonal entry; matrix is not SPD")
        self.inv_diag = 1.0 / d

    def apply(self, r):
        return self.inv_diag * r


class IC0Preconditioner:
    """Zero-fill incomplete Cholesky ``A ~ L L^T`` on the lower pattern of ``A``."""

    name = "ic0"

    def __init__(self, A: SparseSymMatrix):
        low = sp.tril(A.csr, format="csr")
        low.sort_indices()
        indptr = low.indptr.astype(np.int64)
        indices = low.indices.astype(np.int64)
        # the factor loops expect the diagonal as the last entry of each row
        last = indices[np.maximum(indptr[1:] - 1, 0)]
        if np.any(np.diff(indptr) == 0) or np.any(last != np.arange(A.n)):
            raise NotSPDError("missing diagonal entry; matrix is not SPD")
        values, ok = kernels.ic0_factor(indptr, indices, low.data.astype(np.float64))
        if not ok:
            raise NotSPDError("IC(0) breakdown: non-positive pivot")
        self.indptr, self.indices, self.values = indptr, indices, values

    def apply(self, r):
        y = kernels.lower_solve(self.indptr, self.indices, self.values,
                                np.ascontiguousarray(r, dtype=np.float64))
        return kernels.upper_solve(self.indptr, self.indices, self.values, y)


class IdentityPreconditioner:
    name = "none"

    def __init__(self, A=None):
        pass

    def apply(self, r):
        return r


def make_preconditioner(A: SparseSymMatrix, kind: str = "ic0"):
    """Build a preconditioner; IC(0) breakdown falls back to Jacobi with a warning."""
    if kind == "none":
        return IdentityPreconditioner()
    if kind == "jacobi":
        return JacobiPreconditioner(A)
    if kind == "ic0":
        try:
            return IC0Preconditioner(A)
        except NotSPDError as exc:
            warnings.warn(f"{exc}; falling back to Jacobi preconditioning",
                          RuntimeWarning, stacklevel=2)
            return JacobiPreconditioner(A)
    raise ConfigurationError(f"unknown preconditioner {kind!r}")


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float
    residual_history: list = field(default_factory=list, repr=False)


def cg_solve(A: SparseSymMatrix, b, tol: float = DEFAULT_CG_TOL, max_iter: int | None = None,
             precond="ic0", x0=None) -> CGResult:
    """Preconditioned conjugate gradients for SPD ``A``.

    Stops once ``||b - A x|| <= tol * ||b||``. ``precond`` is a name
    (``"none"``, ``"jacobi"``, ``"ic0"``) or an object with ``apply``.
    Raises :class:`NotSPDError` if a search direction has ``p^T A p <= 0``
    and :class:`SolverError` (carrying the best iterate) on non-convergence.
    """
    if not tol > 0:
        raise ConfigurationError("tol must be positive")
    A_ = _csr(A)
    n = A_.shape[0]
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise ConfigurationError(f"right-hand side has shape {b.shape}, expected ({n},)")
    if max_iter is None:
        max_iter = max(10 * n, 100)
    M = make_preconditioner(A, precond) if isinstance(precond, str) else precond

    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0, [0.0])
    r = b - A_ @ x if x0 is not None else b.copy()
    res = np.linalg.norm(r) / bnorm
    history = [res]
    best_x, best_res = x.copy(), res
    if res <= tol:
        return CGResult(x, 0, res, history)
    z = M.apply(r)
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A_ @ p
        pAp = p @ Ap
        if not pAp > 0:
            raise NotSPDError(f"p^T A p = {pAp:.3e} <= 0 at iteration {it}; matrix is not SPD",
                              x=best_x, residual=best_res, iterations=it)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / bnorm
        history.append(res)
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= tol:
            return CGResult(x, it, res, history)
        z = M.apply(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not converge in {max_iter} iterations "
                      f"(relative residual {best_res:.3e} > {tol:.1e})",
                      x=best_x, residual=best_res, iterations=max_iter)


class SPDSolver:
    """Reusable solver for many right-hand sides with one SPD matrix.

    ``method="cg"`` loops preconditioned CG with a shared preconditioner;
    ``method="direct"`` factorizes once with a sparse LU.
    """

    def __init__(self, A: SparseSymMatrix, method: str = "cg", tol: float = DEFAULT_CG_TOL,
                 precond: str = "ic0", max_iter: int | None = None):
        self.A = A if isinstance(A, SparseSymMatrix) else SparseSymMatrix(A, check=False)
        self.method = method
        self.tol = tol
        self.max_iter = max_iter
        self.iterations = 0
        if method == "cg":
            self._precond = make_preconditioner(self.A, precond)
        elif method == "direct":
            self._lu = splu(self.A.csr.tocsc(), permc_spec="MMD_AT_PLUS_A")
        else:
            raise ConfigurationError(f"unknown solver method {method!r}")

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        if b.ndim == 2:
            if self.method == "direct":
                return self._lu.solve(np.asfortranarray(b))
            return np.column_stack([self.solve(b[:, j]) for j in range(b.shape[1])])
        if self.method == "direct":
            return self._lu.solve(b)
        result = cg_solve(self.A, b, self.tol, self.max_iter, self._precond)
        self.iterations += result.iterations
        return result.x


@dataclass
class SpectralInterval:
    lam_min: float
    lam_max: float
    ritz_values: list = field(default_factory=list, repr=False)
    iterations: int = 0

    def __iter__(self):
        return iter((self.lam_min, self.lam_max))


def estimate_spectral_interval(A: SparseSymMatrix, M: SparseSymMatrix, lam_min: float = 1.0,
                               safety: float = 1.1, rq_tol: float = 1e-4,
                               stagnation_tol: float = 1e-3, max_iter: int = 200,
                               seed: int = 0) -> SpectralInterval:
    """Bracket the generalized spectrum of ``A v = lam M v``.

    The upper end comes from power iteration on ``M^{-1} A`` (inner CG
    solves with ``M``), stopped once the Rayleigh quotient changes by less
    than ``rq_tol`` relatively, and inflated by ``safety``. The lower end is
    the analytic bound ``lam_min`` (1 for the identity-shifted operators the
    sampler builds). After ``max_iter`` iterations a relative change still
    above ``stagnation_tol`` is an error.
    """
    n = _csr(A).shape[0]
    if _csr(M).shape[0] != n:
        raise ConfigurationError("A and M must have the same dimension")
    Msolver = SPDSolver(M, "cg", tol=1e-10, precond="jacobi")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    A_, M_ = _csr(A), _csr(M)
    v /= np.sqrt(v @ (M_ @ v))
    ritz = []
    rq_old = None
    change = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        Av = A_ @ v
        rq = float(v @ Av) / float(v @ (M_ @ v))
        ritz.append(rq)
        if rq_old is not None:
            change = abs(rq - rq_old) / abs(rq)
            if change < rq_tol:
                break
        rq_old = rq
        w = Msolver.solve(Av)
        v = w / np.sqrt(w @ (M_ @ w))
    else:
        if change >= stagnation_tol:
            raise SolverError(f"power iteration stagnated: relative Rayleigh-quotient change "
                              f"{change:.2e} after {max_iter} iterations")
    lam_max = safety * max(ritz)
    return SpectralInterval(lam_min, max(lam_max, lam_min), ritz, it)
