"""Heat conduction with a SIMP conductivity and its compliance gradient."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigurationError, SolverError
from ..fem import BoundaryCondition, apply_dirichlet, assemble_mass, dirichlet_dofs, local_stiffness
from ..mesh import Mesh
from ..sparse import SparseSymMatrix, SPDSolver
from .density import simp_kappa, simp_kappa_derivative


@dataclass
class LoadCase:
    """Nodal heat sources (columns of ``loads``) sharing one set of fixed nodes."""

    dirichlet: np.ndarray
    loads: np.ndarray

    def __post_init__(self):
        self.dirichlet = np.unique(np.asarray(self.dirichlet, dtype=np.int64))
        self.loads = np.asarray(self.loads, dtype=float)
        if self.loads.ndim == 1:
            self.loads = self.loads[:, None]


class ThermalModel:
    """Assembles ``K(kappa) = sum_e kappa_e K_e`` on a fixed sparsity pattern."""

    def __init__(self, mesh: Mesh, method: str = "direct", tol: float = 1e-12):
        self.mesh = mesh
        self.method = method
        self.tol = tol
        self.Ke = local_stiffness(mesh)
        self.M = assemble_mass(mesh)
        e = mesh.elements
        nv = e.shape[1]
        n = mesh.num_nodes
        rows = np.repeat(e, nv, axis=1).ravel()
        cols = np.tile(e, (1, nv)).ravel()
        keys, self._slot = np.unique(rows * n + cols, return_inverse=True)
        self._slot = self._slot.ravel()
        self._indices = keys % n
        self._indptr = np.searchsorted(keys // n, np.arange(n + 1))
        self._n = n

    def stiffness(self, kappa) -> SparseSymMatrix:
        kappa = np.asarray(kappa, dtype=float)
        if kappa.shape != (self.mesh.num_elements,):
            raise ConfigurationError("one conductivity per element required")
        data = np.bincount(self._slot, (kappa[:, None, None] * self.Ke).ravel(),
                           minlength=len(self._indices))
        A = sp.csr_matrix((data, self._indices, self._indptr), shape=(self._n, self._n))
        return SparseSymMatrix(A, check=False)

    def solve(self, kappa, case: LoadCase) -> np.ndarray:
        """Temperatures for every load column, shape ``(n, N)``."""
        K = self.stiffness(kappa)
        rhs = self.M @ case.loads
        Kc, _ = apply_dirichlet(K, np.zeros(self._n), case.dirichlet)
        rhs[case.dirichlet] = 0.0
        try:
            U = SPDSolver(Kc, self.method, tol=self.tol).solve(rhs)
        except SolverError as exc:
            raise SolverError(f"state solve failed: {exc}", x=exc.x, residual=exc.residual,
                              iterations=exc.iterations) from exc
        U = np.asarray(U).reshape(self._n, -1)
        U[case.dirichlet] = 0.0
        return U

    def element_energy(self, U) -> np.ndarray:
        """``sum_i u_i,e^T K_e u_i,e`` per element (unit conductivity)."""
        Ue = U[self.mesh.elements]  # (m, nv, N)
        return np.einsum("mai,mab,mbi->m", Ue, self.Ke, Ue)


def element_average(mesh: Mesh, nodal) -> np.ndarray:
    return np.asarray(nodal)[mesh.elements].mean(axis=1)


def element_average_adjoint(mesh: Mesh, grad_elem) -> np.ndarray:
    nv = mesh.nodes_per_element
    w = np.repeat(np.asarray(grad_elem) / nv, nv)
    return np.bincount(mesh.elements.ravel(), w, minlength=mesh.num_nodes)


def thermal_solve(mesh: Mesh, rho_t, f, bc, p: float = 3.0, kappa_min: float = 1e-3,
                  kappa_max: float = 1.0, method: str = "direct") -> np.ndarray:
    """Temperature for nodal density ``rho_t`` and nodal source ``f``.

    ``bc`` is a list of :class:`BoundaryCondition` (unlisted boundary is
    insulated) or an explicit array of fixed nodes.
    """
    rho_t = np.broadcast_to(np.asarray(rho_t, dtype=float), (mesh.num_nodes,))
    if bc is None or (len(bc) and isinstance(bc[0], BoundaryCondition)):
        fixed = dirichlet_dofs(mesh, bc)
    else:
        fixed = np.asarray(bc, dtype=np.int64)
    kappa = simp_kappa(element_average(mesh, rho_t), p, kappa_min, kappa_max)
    f = np.broadcast_to(np.asarray(f, dtype=float), (mesh.num_nodes,))
    U = ThermalModel(mesh, method).solve(np.atleast_1d(kappa), LoadCase(fixed, f.copy()))
    return U[:, 0]


def compliance(model: ThermalModel, case: LoadCase, U) -> np.ndarray:
    """``int u_i f_i`` for each load column."""
    return np.einsum("ni,ni->i", model.M @ case.loads, U)


def compliance_and_gradient(model: ThermalModel, rho_phys, cases, scale: float,
                            p: float = 3.0, kappa_min: float = 1e-3, kappa_max: float = 1.0):
    """Sample-average compliance and its gradient w.r.t. the nodal physical density.

    ``j = scale * sum over cases and columns of int u f``. The problem is
    self-adjoint, so ``dj/dkappa_e = -scale * sum u_e^T K_e u_e``.

    The filter can overshoot ``[0, 1]`` slightly; element densities are
    clipped and the gradient is that of the clipped map.
    """
    mesh = model.mesh
    rho_e = element_average(mesh, rho_phys)
    inside = (rho_e >= 0.0) & (rho_e <= 1.0)
    rho_e = np.clip(rho_e, 0.0, 1.0)
    kappa = simp_kappa(rho_e, p, kappa_min, kappa_max)
    dkappa = np.where(inside, simp_kappa_derivative(rho_e, p, kappa_min, kappa_max), 0.0)
    terms = []
    energy = np.zeros(mesh.num_elements)
    for case in cases:
        U = model.solve(np.atleast_1d(kappa), case)
        terms.extend(compliance(model, case, U).tolist())
        energy += model.element_energy(U)
    j = scale * math.fsum(terms)
    grad_e = -scale * dkappa * energy
    return j, element_average_adjoint(mesh, grad_e)
