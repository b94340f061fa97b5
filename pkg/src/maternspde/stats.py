"""Monte-Carlo statistics over field batches and covariance verification."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError
from .grf import FieldSample, GrfConfig, GrfSampler, matern_covariance
from .mesh import Mesh

CSV_COLUMNS = ("pair_id", "dist", "dir_x", "dir_y", "dir_z", "emp_cov", "analytic_cov",
               "stderr", "pass")


def _as_matrix(samples) -> np.ndarray:
    if len(samples) and isinstance(samples[0], FieldSample):
        return np.vstack([s.values for s in samples])
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _require_n(X):
    if X.shape[0] < 2:
        raise ConfigurationError("at least two samples are needed")


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    mean_stderr: float
    variance_stderr: float

    def __iter__(self):
        return iter((self.mean, self.variance, self.mean_stderr, self.variance_stderr))


def empirical_moments(samples, node: int) -> Moments:
    """Unbiased mean and variance at ``node`` with their standard errors.

    The variance error uses the normal-theory formula ``var * sqrt(2/(N-1))``.
    """
    X = _as_matrix(samples)
    _require_n(X)
    x = X[:, node]
    n = len(x)
    var = float(np.var(x, ddof=1))
    return Moments(float(np.mean(x)), var, math.sqrt(var / n), var * math.sqrt(2.0 / (n - 1)))


def empirical_covariance(samples, node_a: int, node_b: int,
                         known_zero_mean: bool = True) -> tuple[float, float]:
    """``(cov, stderr)`` between two nodes.

    With ``known_zero_mean`` the estimator is ``mean(u_a * u_b)`` and the
    error is the sample standard deviation of the products over ``sqrt(N)``.
    Otherwise the means are subtracted and the ``N - 1`` divisor is used.
    """
    X = _as_matrix(samples)
    _require_n(X)
    a, b = X[:, node_a], X[:, node_b]
    n = len(a)
    if known_zero_mean:
        prod = a * b
        return float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(n))
    prod = (a - a.mean()) * (b - b.mean())
    cov = float(prod.sum() / (n - 1))
    return cov, float(prod.std(ddof=1) / math.sqrt(n))


def boundary_distance(mesh: Mesh, points) -> np.ndarray:
    """Euclidean distance from each point to the nearest boundary face.

    Meshes without boundary faces (closed surfaces) give ``inf``.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    faces = mesh.boundary_faces
    if len(faces) == 0:
        return np.full(len(P), np.inf)
    if faces.shape[1] == 1:
        Q = mesh.nodes[faces[:, 0]]
        return np.min(np.linalg.norm(P[:, None, :] - Q[None, :, :], axis=-1), axis=1)
    A = mesh.nodes[faces[:, 0]]
    B = mesh.nodes[faces[:, 1]]
    AB = B - A
    AP = P[:, None, :] - A[None, :, :]
    t = np.clip(np.einsum("pfi,fi->pf", AP, AB) / np.einsum("fi,fi->f", AB, AB), 0.0, 1.0)
    closest = A[None] + t[..., None] * AB[None]
    return np.min(np.linalg.norm(P[:, None, :] - closest, axis=-1), axis=1)


def nearest_node(mesh: Mesh, point) -> int:
    p = np.asarray(point, dtype=float)
    return int(np.argmin(np.linalg.norm(mesh.nodes - p, axis=1)))


def probe_pairs(mesh: Mesh, center, offsets) -> list[tuple[int, int]]:
    """Node pairs ``(node near center, node near center + offset)``."""
    c = np.asarray(center, dtype=float)
    a = nearest_node(mesh, c)
    return [(a, nearest_node(mesh, mesh.nodes[a] + np.asarray(o, dtype=float)))
            for o in offsets]


@dataclass(frozen=True)
class PairResult:
    pair_id: int
    node_a: int
    node_b: int
    distance: float
    direction: tuple[float, float, float]
    empirical: float
    analytic: float
    stderr: float
    passed: bool


@dataclass
class CovarianceReport:
    pairs: list[PairResult]
    n_samples: int
    fingerprint: str
    abs_floor: float
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.pairs)

    def rows(self) -> list[tuple]:
        return [(p.pair_id, p.distance, *p.direction, p.empirical, p.analytic, p.stderr,
                 int(p.passed)) for p in self.pairs]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows():
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def summary(self) -> str:
        failed = [p.pair_id for p in self.pairs if not p.passed]
        head = (f"covariance check: {len(self.pairs) - len(failed)}/{len(self.pairs)} pairs "
                f"passed (N={self.n_samples}, config {self.fingerprint})")
        return head if not failed else f"{head}; failing pairs {failed}"


def compare_pairs(samples, mesh: Mesh, config: GrfConfig, probes: Iterable[Sequence[int]],
                  abs_floor: float | None = None, known_zero_mean: bool = True):
    """Empirical vs analytic covariance for each probe pair of an existing batch."""
    X = _as_matrix(samples)
    _require_n(X)
    if abs_floor is None:
        abs_floor = 0.03 * config.sigma ** 2
    results = []
    for i, (a, b) in enumerate(probes):
        delta = mesh.nodes[b] - mesh.nodes[a]
        dist = float(np.linalg.norm(delta))
        direction = np.zeros(3)
        if dist > 0:
            direction[:len(delta)] = delta / dist
        # a manifold's intrinsic tensor acts on tangent coordinates; at probe
        # separations well below the curvature radius the chord is close enough
        d = mesh.intrinsic_dim
        if mesh.is_embedded:
            analytic = matern_covariance(config, np.zeros(d), np.r_[dist, np.zeros(d - 1)])
        else:
            analytic = matern_covariance(config, mesh.nodes[a], mesh.nodes[b])
        emp, err = empirical_covariance(X, a, b, known_zero_mean)
        ok = abs(emp - analytic) <= max(3.0 * err, abs_floor)
        results.append(PairResult(i, int(a), int(b), dist, tuple(direction.tolist()), emp,
                                  float(analytic), err, bool(ok)))
    return results


def verify_covariance(mesh: Mesh, config: GrfConfig, n: int,
                      probes: Sequence[Sequence[int]], allow_boundary: bool = False,
                      abs_floor: float | None = None, threads: int = 1,
                      sampler: GrfSampler | None = None) -> CovarianceReport:
    """Sample ``n`` fields and check each probe pair against the Matern kernel.

    A pair passes when ``|emp - analytic| <= max(3 * stderr, abs_floor)``;
    ``abs_floor`` defaults to ``0.03 * sigma**2``. Probe nodes must lie more
    than ``2 * max(lengths)`` from the boundary unless ``allow_boundary``.
    """
    if n < 2:
        raise ConfigurationError("verification needs at least two samples")
    probes = [tuple(int(v) for v in p) for p in probes]
    if not probes:
        raise ConfigurationError("no probe pairs given")
    nodes = np.unique(np.array(probes).ravel())
    if nodes.min() < 0 or nodes.max() >= mesh.num_nodes:
        raise ConfigurationError("probe node index out of range")
    if not allow_boundary:
        limit = 2.0 * max(config.lengths)
        dist = boundary_distance(mesh, mesh.nodes[nodes])
        close = nodes[dist <= limit]
        if close.size:
            raise ConfigurationError(
                f"probe nodes {close.tolist()} lie within 2*max(l) = {limit:g} of the boundary; "
                f"pass allow_boundary=True to use them anyway")
    sampler = sampler or GrfSampler(mesh, config)
    X = np.vstack([s.values for s in sampler.batch(n, threads=threads)])
    results = compare_pairs(X, mesh, config, probes, abs_floor)
    floor = 0.03 * config.sigma ** 2 if abs_floor is None else abs_floor
    return CovarianceReport(results, n, config.fingerprint(), floor,
                            {"seed": config.seed, "nu": config.nu,
                             "lengths": list(config.lengths)})
