"""SPDE sampler for Matern-type Gaussian random fields.

A realization solves

    (I - 1/(2 nu) div(Theta grad))^k u = eta W,   k = (2 nu + d) / 4,

discretized with first-order finite elements. With ``S = M + K/(2 nu)``
the discrete operator is ``M^{-1} S``. The exponent is split into an
integer part, applied as repeated solves ``S x_{i+1} = M x_i``, and a
fractional part ``alpha`` in (0, 1), applied through a rational
approximation of ``lam**(-alpha)`` as ``sum c_n (d_n M + S)^{-1} b``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import rational
from .errors import ConfigurationError, SolverError
from .fem import (BoundaryCondition, DiffusionTensor, assemble_mass, assemble_stiffness,
                  build_element_factorization, constrain_matrix, dirichlet_dofs, validate_bcs)
from .mesh import Mesh
from .sparse import DEFAULT_CG_TOL, SPDSolver, estimate_spectral_interval
from .special import bessel_k, matern_correlation
from .whitenoise import NoiseStream, sample_white_noise_vector

log = logging.getLogger(__name__)


@dataclass
class GrfConfig:
    """Everything that defines one field distribution.

    ``lengths`` holds one correlation length per intrinsic dimension (a
    single value is broadcast). ``rotation`` is an angle in radians (2D).
    """

    nu: float
    lengths: Sequence[float]
    rotation: float = 0.0
    sigma: float = 1.0
    bc: Sequence[BoundaryCondition] = ()
    seed: int = 0
    rational_tol: float = rational.DEFAULT_TOL
    solver_tol: float = DEFAULT_CG_TOL
    solver: str = "cg"
    precond: str = "ic0"
    theta_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.nu > 0:
            raise ConfigurationError(f"nu must be positive, got {self.nu}")
        if not self.sigma > 0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")
        self.lengths = tuple(float(l) for l in np.atleast_1d(self.lengths))
        if not all(l > 0 for l in self.lengths):
            raise ConfigurationError(f"correlation lengths must be positive, got {self.lengths}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        if not self.rational_tol > 0 or not self.solver_tol > 0:
            raise ConfigurationError("tolerances must be positive")
        self.bc = tuple(self.bc)
        validate_bcs(self.bc)

    def tensor(self, d: int) -> DiffusionTensor:
        lengths = self.lengths
        if len(lengths) == 1:
            lengths = lengths * d
        if len(lengths) != d:
            raise ConfigurationError(f"{len(self.lengths)} correlation lengths given for a "
                                     f"{d}-dimensional domain")
        return DiffusionTensor(lengths, self.rotation, self.theta_overrides)

    def kappa(self) -> float:
        """``sqrt(2 nu) / l`` for isotropic configurations."""
        if len(set(self.lengths)) != 1:
            raise ConfigurationError("kappa is only defined for isotropic fields")
        return math.sqrt(2.0 * self.nu) / self.lengths[0]

    def exponent(self, d: int) -> float:
        return (2.0 * self.nu + d) / 4.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["bc"] = [{"kind": bc.kind, "attributes": sorted(bc.attributes)} for bc in self.bc]
        out["theta_overrides"] = {str(k): np.asarray(v).tolist()
                                  for k, v in self.theta_overrides.items()}
        return out

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class FieldSample:
    values: np.ndarray
    seed: int
    index: int
    fingerprint: str

    def __len__(self):
        return len(self.values)


def normalization_eta(config: GrfConfig, d: int) -> float:
    """Scaling of the white noise that gives unit marginal variance in free space."""
    theta = config.tensor(d)
    nu = config.nu
    log_eta2 = (0.5 * d * math.log(2.0 * math.pi) + 0.5 * math.log(theta.det())
                + math.lgamma(nu + 0.5 * d) - 0.5 * d * math.log(nu) - math.lgamma(nu))
    return math.exp(0.5 * log_eta2)


def matern_covariance(config: GrfConfig, x, y) -> float | np.ndarray:
    """``sigma^2 M_nu(sqrt(2 nu) dist(x, y))`` with the Theta-weighted distance.

    ``x`` and ``y`` are points (or broadcastable arrays of points along the
    last axis).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    delta = np.atleast_1d(x - y)
    d = delta.shape[-1]
    theta_inv = np.linalg.inv(config.tensor(d).matrix())
    dist = np.sqrt(np.einsum("...i,ij,...j->...", delta, theta_inv, delta))
    cov = config.sigma ** 2 * matern_correlation(config.nu, math.sqrt(2 * config.nu) * dist)
    return float(cov) if np.ndim(cov) == 0 else cov


class GrfSampler:
    """Assembles operators, fits the rational stage once, then draws samples.

    ``route="rational"`` pushes one unit of an integer exponent through the
    rational stage (with ``alpha = 1``); it exists to cross-check the two
    paths.
    """

    def __init__(self, mesh: Mesh, config: GrfConfig, route: str = "auto"):
        if route not in ("auto", "rational"):
            raise ConfigurationError(f"unknown route {route!r}")
        self.mesh = mesh
        self.config = config
        d = mesh.intrinsic_dim
        self.dim = d
        theta = config.tensor(d)
        self.eta = normalization_eta(config, d)
        self.fingerprint = config.fingerprint()

        self.dirichlet = dirichlet_dofs(mesh, config.bc)
        M = assemble_mass(mesh)
        K = assemble_stiffness(mesh, theta, scale=1.0 / (2.0 * config.nu))
        self.M = constrain_matrix(M, self.dirichlet)
        self.S = constrain_matrix(M + K, self.dirichlet)
        self.factorization = build_element_factorization(mesh)

        k = config.exponent(d)
        n_int, alpha = rational.split_exponent(k)
        if route == "rational" and alpha == 0.0:
            n_int, alpha = n_int - 1, 1.0
        self.exponent = k
        self.n_integer, self.alpha = n_int, alpha

        self.ra = None
        self.interval = None
        self._shifted = []
        if alpha > 0:
            self.interval = estimate_spectral_interval(self.S, self.M)
            self.ra = rational.fit_fractional_power(alpha, self.interval.lam_min,
                                                    self.interval.lam_max, config.rational_tol)
            for shift in self.ra.shifts:
                self._shifted.append(self._solver(self.S + self.M * float(shift)))
        self._S_solver = self._solver(self.S) if self.n_integer > 0 else None
        log.debug("sampler: k=%g split into %d integer solves + alpha=%g (%d rational terms)",
                  k, self.n_integer, alpha, 0 if self.ra is None else self.ra.num_terms)

    def _solver(self, A):
        c = self.config
        return SPDSolver(A, c.solver, tol=c.solver_tol, precond=c.precond)

    def white_noise(self, index: int, z=None) -> np.ndarray:
        stream = NoiseStream(self.config.seed, index)
        return sample_white_noise_vector(self.factorization, stream, self.dirichlet, z)

    def apply(self, b) -> np.ndarray:
        """Map a white-noise right-hand side to unit-variance field coefficients."""
        b = self.eta * np.asarray(b, dtype=float)
        try:
            if self.ra is not None:
                x = np.zeros_like(b)
                for c, solver in zip(self.ra.weights, self._shifted):
                    x += c * solver.solve(b)
                remaining = self.n_integer
            else:
                x = self._S_solver.solve(b)
                remaining = self.n_integer - 1
            for _ in range(remaining):
                rhs = self.M @ x
                rhs[self.dirichlet] = 0.0
                x = self._S_solver.solve(rhs)
        except SolverError as exc:
            stage = "rational" if self.ra is not None else "integer"
            raise SolverError(f"{stage} stage: {exc}", x=exc.x, residual=exc.residual,
                              iterations=exc.iterations) from exc
        x[self.dirichlet] = 0.0
        return self.config.sigma * x

    def sample(self, index: int = 0, z=None) -> FieldSample:
        values = self.apply(self.white_noise(index, z))
        return FieldSample(values, int(self.config.seed), int(index), self.fingerprint)

    def batch(self, n: int, start: int = 0, threads: int = 1) -> list[FieldSample]:
        if n < 1:
            raise ConfigurationError("batch size must be >= 1")
        indices = range(start, start + n)
        if threads <= 1:
            return [self.sample(i) for i in indices]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(self.sample, indices))


def sample_grf(mesh: Mesh, config: GrfConfig, sample_index: int = 0, route: str = "auto",
               z=None) -> FieldSample:
    return GrfSampler(mesh, config, route).sample(sample_index, z)


def sample_batch(mesh: Mesh, config: GrfConfig, n: int, threads: int = 1,
                 route: str = "auto") -> list[FieldSample]:
    """``n`` samples with indices ``0..n-1``; assembly and fit happen once."""
    return GrfSampler(mesh, config, route).batch(n, threads=threads)


def batch_matrix(samples: Sequence[FieldSample]) -> np.ndarray:
    """Stack samples into an ``(N, num_nodes)`` array."""
    return np.vstack([s.values for s in samples])


__all__ = ["GrfConfig", "FieldSample", "GrfSampler", "normalization_eta", "matern_covariance",
           "sample_grf", "sample_batch", "batch_matrix", "bessel_k"]
