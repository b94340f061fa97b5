"""Density pipeline: screened-Poisson filter, SIMP interpolation, tanh projection."""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import ConfigurationError
from ..fem import apply_dirichlet, assemble_mass, assemble_stiffness
from ..mesh import Mesh
from ..sparse import SPDSolver


class PdeFilter:
    """``(r^2 K + M) rho_t = M rho`` with optional fixed values on boundary parts.

    ``fixed`` maps boundary attributes to the value (0 or 1) the filtered
    density takes there; all other boundary is natural (Neumann). The
    operator is self-adjoint, so :meth:`backward` applies the transposed
    chain rule with one more solve.
    """

    def __init__(self, mesh: Mesh, r: float, fixed: dict | None = None,
                 method: str = "direct", M=None):
        if r < 0:
            raise ConfigurationError("filter radius must be >= 0")
        self.mesh = mesh
        self.r = float(r)
        self.M = M if M is not None else assemble_mass(mesh)
        F = self.M + assemble_stiffness(mesh, None, scale=self.r ** 2) if r > 0 else self.M
        n = mesh.num_nodes
        dofs, vals = [], []
        for attr, value in (fixed or {}).items():
            nodes = mesh.boundary_nodes([attr])
            if nodes.size == 0:
                raise ConfigurationError(f"no boundary faces carry attribute {attr}")
            dofs.append(nodes)
            vals.append(np.full(nodes.size, float(value)))
        self.fixed_dofs = np.concatenate(dofs) if dofs else np.zeros(0, dtype=np.int64)
        self.fixed_values = np.concatenate(vals) if vals else np.zeros(0)
        if len(np.unique(self.fixed_dofs)) != len(self.fixed_dofs):
            raise ConfigurationError("fixed filter attributes share nodes")
        Fc, self._lift = apply_dirichlet(F, np.zeros(n), self.fixed_dofs, self.fixed_values)
        self._solver = SPDSolver(Fc, method, tol=1e-12)

    def __call__(self, rho) -> np.ndarray:
        rhs = self.M @ np.asarray(rho, dtype=float) + self._lift
        rhs[self.fixed_dofs] = self.fixed_values
        return self._solver.solve(rhs)

    def backward(self, grad_filtered) -> np.ndarray:
        """Map ``dJ/d(rho_t)`` to ``dJ/d(rho)``."""
        g = np.array(grad_filtered, dtype=float, copy=True)
        g[self.fixed_dofs] = 0.0
        return self.M @ self._solver.solve(g)


def pde_filter(mesh: Mesh, rho, r: float, fixed: dict | None = None) -> np.ndarray:
    return PdeFilter(mesh, r, fixed)(rho)


def _clamp(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        warnings.warn(f"{name} outside [0, 1] clamped", RuntimeWarning, stacklevel=3)
        x = np.clip(x, 0.0, 1.0)
    return x


def simp_kappa(rho_t, p: float = 3.0, kappa_min: float = 1e-3, kappa_max: float = 1.0):
    x = _clamp(rho_t, "density")
    out = kappa_min + x ** p * (kappa_max - kappa_min)
    return out if out.ndim else float(out)


def simp_kappa_derivative(rho_t, p: float = 3.0, kappa_min: float = 1e-3,
                          kappa_max: float = 1.0):
    x = _clamp(rho_t, "density")
    out = p * x ** (p - 1) * (kappa_max - kappa_min)
    return out if out.ndim else float(out)


def projection(rho_t, beta: float, eta: float = 0.5):
    """Smoothed Heaviside step at ``eta`` that keeps 0 and 1 fixed."""
    x = np.asarray(rho_t, dtype=float)
    a = np.tanh(beta * eta)
    out = (a + np.tanh(beta * (x - eta))) / (a + np.tanh(beta * (1.0 - eta)))
    return out if out.ndim else float(out)


def projection_derivative(rho_t, beta: float, eta: float = 0.5):
    x = np.asarray(rho_t, dtype=float)
    denom = np.tanh(beta * eta) + np.tanh(beta * (1.0 - eta))
    out = beta * (1.0 - np.tanh(beta * (x - eta)) ** 2) / denom
    return out if out.ndim else float(out)
