"""First-order Galerkin assembly on volume and embedded-surface meshes.

P1 on segments and triangles (embedded triangles use a per-element
orthonormal tangent frame, which turns the Laplacian into the
Laplace-Beltrami operator), Q1 on planar quads with 2x2 Gauss quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DegenerateGeometryError
from .mesh import Mesh
from .sparse import SparseSymMatrix

NEUMANN = "neumann_homogeneous"
DIRICHLET = "dirichlet_homogeneous"


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str
    attributes: frozenset

    def __init__(self, kind: str, attributes: Iterable[int]):
        if kind in ("neumann", "n"):
            kind = NEUMANN
        elif kind in ("dirichlet", "d"):
            kind = DIRICHLET
        if kind not in (NEUMANN, DIRICHLET):
            raise ConfigurationError(f"unknown boundary condition kind {kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "attributes", frozenset(int(a) for a in attributes))


def validate_bcs(bcs: Sequence[BoundaryCondition]):
    seen = set()
    for bc in bcs:
        overlap = seen & bc.attributes
        if overlap:
            raise ConfigurationError(
                f"boundary attributes {sorted(overlap)} appear in more than one condition")
        seen |= bc.attributes


def dirichlet_dofs(mesh: Mesh, bcs: Sequence[BoundaryCondition] | None) -> np.ndarray:
    """Nodes constrained by any Dirichlet condition; unlisted attributes are Neumann."""
    if not bcs:
        return np.zeros(0, dtype=np.int64)
    validate_bcs(bcs)
    attrs = set()
    for bc in bcs:
        if bc.kind == DIRICHLET:
            attrs |= bc.attributes
    if not attrs:
        return np.zeros(0, dtype=np.int64)
    return mesh.boundary_nodes(sorted(attrs))


def rotation_2d(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass
class DiffusionTensor:
    """Correlation tensor ``Theta = Q diag(l^2) Q^T``.

    ``Q`` rotates the first principal axis to angle ``rotation`` (radians) in
    2D. On embedded surfaces the tensor is read in each element's local
    tangent frame (first axis along the element's 0->1 edge). ``overrides``
    maps element indices to explicit ``d x d`` tensors for piecewise-constant
    inhomogeneous fields.
    """

    lengths: Sequence[float]
    rotation: float = 0.0
    overrides: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        lengths = np.atleast_1d(np.asarray(self.lengths, dtype=float))
        if lengths.ndim != 1 or len(lengths) not in (1, 2, 3) or np.any(~(lengths > 0)):
            raise ConfigurationError(f"correlation lengths must be positive, got {self.lengths}")
        self.lengths = lengths
        for e, t in self.overrides.items():
            t = np.asarray(t, dtype=float)
            if t.shape != (self.dim, self.dim) or not _is_spd(t):
                raise ConfigurationError(f"override tensor for element {e} is not SPD "
                                         f"of size {self.dim}")

    @classmethod
    def isotropic(cls, length: float, dim: int) -> "DiffusionTensor":
        return cls([length] * dim)

    @property
    def dim(self) -> int:
        return len(self.lengths)

    def matrix(self) -> np.ndarray:
        D = np.diag(self.lengths ** 2)
        if self.dim == 1:
            return D
        if self.dim == 2:
            Q = rotation_2d(self.rotation)
            return Q @ D @ Q.T
        if np.any(np.asarray(self.rotation) != 0):
            from scipy.spatial.transform import Rotation
            Q = Rotation.from_euler("ZYX", np.broadcast_to(self.rotation, 3)).as_matrix()
            return Q @ D @ Q.T
        return D

    def det(self) -> float:
        return float(np.prod(self.lengths ** 2))

    def element_tensors(self, num_elements: int) -> np.ndarray:
        T = np.broadcast_to(self.matrix(), (num_elements, self.dim, self.dim)).copy()
        for e, t in self.overrides.items():
            T[int(e)] = t
        return T


def _is_spd(t):
    if not np.allclose(t, t.T, rtol=0, atol=1e-14 * np.abs(t).max()):
        return False
    return bool(np.all(np.linalg.eigvalsh(t) > 0))


# 2x2 Gauss rule on the reference square [0,1]^2
_G = 0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)
_QUAD_PTS = np.array([[_G[0], _G[0]], [_G[1], _G[0]], [_G[1], _G[1]], [_G[0], _G[1]]])
_QUAD_W = np.full(4, 0.25)


def _q1_shape(xi, eta):
    N = np.array([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta])
    dN = np.array([[-(1 - eta), -(1 - xi)], [1 - eta, -xi], [eta, xi], [-eta, 1 - xi]])
    return N, dN


def _local_coords(mesh: Mesh) -> np.ndarray:
    """Element vertex coordinates in an intrinsic frame, shape ``(m, nv, d)``.

    Volume elements return their ambient coordinates. Embedded triangles are
    mapped isometrically into a 2D tangent frame; embedded segments to arc
    length.
    """
    x = mesh.nodes[mesh.elements]
    if not mesh.is_embedded:
        return x
    x = x - x[:, :1]
    e1 = x[:, 1]
    e1 = e1 / np.linalg.norm(e1, axis=1, keepdims=True)
    if mesh.kind == "segment":
        return np.einsum("mvk,mk->mv", x, e1)[:, :, None]
    v = x[:, 2] - np.einsum("mk,mk->m", x[:, 2], e1)[:, None] * e1
    e2 = v / np.linalg.norm(v, axis=1, keepdims=True)
    return np.stack([np.einsum("mvk,mk->mv", x, e1), np.einsum("mvk,mk->mv", x, e2)], axis=-1)


def local_mass(mesh: Mesh) -> np.ndarray:
    """Exact element mass matrices, shape ``(m, nv, nv)``."""
    m = mesh.num_elements
    vol = mesh.element_measures()
    if mesh.kind == "segment":
        ref = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        return vol[:, None, None] * ref
    if mesh.kind == "triangle":
        ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
        return vol[:, None, None] * ref
    x = _local_coords(mesh)
    Me = np.zeros((m, 4, 4))
    for (xi, eta), w in zip(_QUAD_PTS, _QUAD_W):
        N, dN = _q1_shape(xi, eta)
        J = np.einsum("mvi,vj->mij", x, dN)
        detJ = np.linalg.det(J)
        if np.any(detJ <= 0):
            bad = int(np.flatnonzero(detJ <= 0)[0])
            raise DegenerateGeometryError(f"quad element {bad} is inverted or degenerate", bad)
        Me += (w * detJ)[:, None, None] * np.outer(N, N)
    return Me


def _gradients_p1(x):
    """Constant P1 basis gradients for simplices with intrinsic coordinates ``x``."""
    d = x.shape[2]
    J = (x[:, 1:] - x[:, :1]).transpose(0, 2, 1)  # (m, d, d), columns are edges
    detJ = np.linalg.det(J) if d > 1 else J[:, 0, 0]
    if np.any(np.abs(detJ) <= 0):
        bad = int(np.flatnonzero(np.abs(detJ) <= 0)[0])
        raise DegenerateGeometryError(f"element {bad} is degenerate", bad)
    Jinv = np.linalg.inv(J)
    ref = np.vstack([-np.ones((1, d)), np.eye(d)])  # reference gradients (d+1, d)
    return np.einsum("vi,mij->mvj", ref, Jinv)


def local_stiffness(mesh: Mesh, theta: DiffusionTensor | np.ndarray | None = None) -> np.ndarray:
    """Element matrices of ``int (Theta grad phi_j) . grad phi_i``, shape ``(m, nv, nv)``.

    ``theta`` may be a :class:`DiffusionTensor`, a constant ``d x d`` array,
    a per-element ``(m, d, d)`` array or ``None`` for the identity.
    """
    m, d = mesh.num_elements, mesh.intrinsic_dim
    T = _element_theta(theta, m, d)
    x = _local_coords(mesh)
    if mesh.kind in ("segment", "triangle"):
        G = _gradients_p1(x)
        vol = mesh.element_measures()
        return vol[:, None, None] * np.einsum("mik,mkl,mjl->mij", G, T, G)
    Ke = np.zeros((m, 4, 4))
    for (xi, eta), w in zip(_QUAD_PTS, _QUAD_W):
        _, dN = _q1_shape(xi, eta)
        J = np.einsum("mvi,vj->mij", x, dN)
        detJ = np.linalg.det(J)
        if np.any(detJ <= 0):
            bad = int(np.flatnonzero(detJ <= 0)[0])
            raise DegenerateGeometryError(f"quad element {bad} is inverted or degenerate", bad)
        G = np.einsum("vj,mji->mvi", dN, np.linalg.inv(J))
        Ke += (w * detJ)[:, None, None] * np.einsum("mik,mkl,mjl->mij", G, T, G)
    return Ke


def _element_theta(theta, m, d):
    if theta is None:
        return np.broadcast_to(np.eye(d), (m, d, d))
    if isinstance(theta, DiffusionTensor):
        if theta.dim != d:
            raise ConfigurationError(
                f"diffusion tensor has dimension {theta.dim}, mesh is {d}-dimensional")
        return theta.element_tensors(m)
    T = np.asarray(theta, dtype=float)
    if T.ndim == 0:
        T = T * np.eye(d)
    if T.shape == (d, d):
        if not _is_spd(T):
            raise ConfigurationError("diffusion tensor is not SPD")
        return np.broadcast_to(T, (m, d, d))
    if T.shape == (m, d, d):
        return T
    raise ConfigurationError(f"diffusion tensor has shape {T.shape}, expected ({d}, {d})")


def assemble(mesh: Mesh, local: np.ndarray, weights=None) -> SparseSymMatrix:
    """Scatter-add element matrices, optionally scaled per element."""
    if weights is not None:
        local = local * np.asarray(weights, dtype=float)[:, None, None]
    e = mesh.elements
    nv = e.shape[1]
    rows = np.repeat(e, nv, axis=1).ravel()
    cols = np.tile(e, (1, nv)).ravel()
    n = mesh.num_nodes
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return SparseSymMatrix(A, check=False)


def assemble_mass(mesh: Mesh) -> SparseSymMatrix:
    return assemble(mesh, local_mass(mesh))


def assemble_stiffness(mesh: Mesh, theta=None, scale: float = 1.0,
                       coefficients=None) -> SparseSymMatrix:
    """``K_ij = scale * int coefficient * (Theta grad phi_j) . grad phi_i``.

    ``coefficients`` is an optional per-element scalar multiplier (e.g. a
    SIMP conductivity).
    """
    w = np.full(mesh.num_elements, float(scale))
    if coefficients is not None:
        w = w * np.asarray(coefficients, dtype=float)
    return assemble(mesh, local_stiffness(mesh, theta), w)


def lumped_mass(mesh: Mesh) -> np.ndarray:
    """Row sums of the consistent mass matrix (nodal integration weights)."""
    Me = local_mass(mesh).sum(axis=2)
    return np.bincount(mesh.elements.ravel(), Me.ravel(), minlength=mesh.num_nodes)


def apply_dirichlet(A: SparseSymMatrix, b, dofs, values=None):
    """Symmetric elimination of prescribed dofs.

    Constrained rows and columns become identity rows; the right-hand side
    takes the prescribed values (zero by default) at constrained dofs and
    has the known contributions moved over elsewhere.
    """
    A_ = A.csr if isinstance(A, SparseSymMatrix) else sp.csr_matrix(A)
    b = np.array(b, dtype=np.float64, copy=True)
    dofs = np.unique(np.asarray(dofs, dtype=np.int64))
    n = A_.shape[0]
    if dofs.size == 0:
        return (A if isinstance(A, SparseSymMatrix) else SparseSymMatrix(A_)), b
    if dofs.min() < 0 or dofs.max() >= n:
        raise IndexError("Dirichlet dof out of range")
    g = np.zeros(n)
    if values is not None:
        g[dofs] = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape)
        b -= A_ @ g
    keep = np.ones(n)
    keep[dofs] = 0.0
    K = sp.diags(keep)
    A_new = (K @ A_ @ K + sp.diags(1.0 - keep)).tocsr()
    A_new.eliminate_zeros()
    b[dofs] = g[dofs]
    return SparseSymMatrix(A_new, check=False), b


def constrain_matrix(A: SparseSymMatrix, dofs) -> SparseSymMatrix:
    return apply_dirichlet(A, np.zeros(A.n), dofs)[0]


@dataclass
class ElementFactorization:
    """Per-element Cholesky factors ``L_T`` of the local mass matrices.

    With ``H = P^T diag(L_T)`` (``P`` scattering element-local dofs into
    global ones) the global mass matrix factors as ``M = H H^T``.
    """

    factors: np.ndarray
    elements: np.ndarray
    num_nodes: int

    @property
    def num_local(self) -> int:
        return self.factors.size // self.factors.shape[-1]

    def apply(self, z) -> np.ndarray:
        """``H z`` for ``z`` of shape ``(m, nv)`` (or flat)."""
        m, nv, _ = self.factors.shape
        z = np.asarray(z, dtype=float).reshape(m, nv)
        local = np.einsum("mij,mj->mi", self.factors, z)
        return np.bincount(self.elements.ravel(), local.ravel(), minlength=self.num_nodes)

    def matrix(self) -> sp.csr_matrix:
        """``H`` as an ``n x (m*nv)`` sparse matrix."""
        m, nv, _ = self.factors.shape
        # entry (node e[T, i], local column T*nv + j) holds L_T[i, j]
        rows = np.repeat(self.elements, nv, axis=1).ravel()
        cols = (np.arange(m)[:, None] * nv + np.tile(np.arange(nv), nv)[None, :]).ravel()
        return sp.csr_matrix((self.factors.ravel(), (rows, cols)),
                             shape=(self.num_nodes, m * nv))


def build_element_factorization(mesh: Mesh) -> ElementFactorization:
    Me = local_mass(mesh)
    try:
        L = np.linalg.cholesky(Me)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(Me).min(axis=1)
        bad = int(np.flatnonzero(eig <= 0)[0])
        raise DegenerateGeometryError(
            f"local mass matrix of element {bad} is not SPD", bad) from None
    return ElementFactorization(L, mesh.elements, mesh.num_nodes)
