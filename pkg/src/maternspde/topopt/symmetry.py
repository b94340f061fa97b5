"""Mirror-symmetric sampling and the half-domain/full-domain node maps.

A field on a domain symmetric about ``x = 0`` splits into a symmetric part
``f_s`` (zero normal derivative on the centerline) and an antisymmetric
part ``f_a`` (zero on the centerline). Two independent half-domain samples
with these centerline conditions give a mirrored pair on the full domain,
``f = (f_s + f_a)/sqrt(2)`` and ``f_bar = (f_s - f_a)/sqrt(2)``.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy.spatial import cKDTree

from ..errors import ConfigurationError
from ..fem import DIRICHLET, BoundaryCondition
from ..grf import GrfConfig, GrfSampler
from ..mesh import Mesh, mark_boundary_segment, rectangle

CENTERLINE = 2
BOTTOM = 3
HEAT_SINK_DIRICHLET = 5


def heat_sink_mesh(cells: int, half: bool = False, dirichlet_length: float = 1.0 / 7.0
                   ) -> tuple[Mesh, float]:
    """Quad grid of ``(-0.5, 0.5)^2`` (or its left half) with the heat-sink support.

    The centered bottom segment of the requested length gets attribute 5,
    snapped outward to whole faces. On the half domain the centerline
    ``x = 0`` carries attribute 2. Returns the mesh and the realized support
    length on the full domain.
    """
    if cells < 2 or cells % 2:
        raise ConfigurationError("heat-sink grids need an even number of cells per side")
    if half:
        mesh = rectangle(cells // 2, cells, (-0.5, -0.5), (0.0, 0.5))
    else:
        mesh = rectangle(cells, cells, (-0.5, -0.5), (0.5, 0.5))
    h = dirichlet_length / 2.0
    mesh, length = mark_boundary_segment(mesh, BOTTOM, HEAT_SINK_DIRICHLET, 0, -h, h)
    return mesh, (2.0 * length if half else length)


def mirror_map(full: Mesh, half: Mesh, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """For each full-domain node: the matching half-domain node and the side sign.

    The half domain is ``x <= 0``; nodes with ``x > 0`` map to their mirror
    image and get sign ``-1``.
    """
    side = np.where(full.nodes[:, 0] > tol, -1.0, 1.0)
    image = full.nodes.copy()
    image[:, 0] = -np.abs(image[:, 0])
    dist, idx = cKDTree(half.nodes).query(image)
    if np.any(dist > tol):
        raise ConfigurationError("full mesh is not the mirror image of the half mesh")
    return idx, side


def multiplicity(half: Mesh, centerline_attr: int = CENTERLINE) -> np.ndarray:
    """2 for half-domain nodes with a mirror twin, 1 on the centerline."""
    w = np.full(half.num_nodes, 2.0)
    w[half.boundary_nodes([centerline_attr])] = 1.0
    return w


def _with_centerline(config: GrfConfig, centerline_attr: int, dirichlet: bool) -> GrfConfig:
    bcs = [BoundaryCondition(bc.kind, bc.attributes - {centerline_attr})
           for bc in config.bc if bc.attributes - {centerline_attr}]
    if dirichlet:
        bcs.append(BoundaryCondition(DIRICHLET, [centerline_attr]))
    return replace(config, bc=tuple(bcs))


class SymmetrizedSampler:
    """Draws ``(f_s, f_a)`` pairs on a half domain.

    Pair ``i`` uses noise indices ``2 i`` (symmetric part) and ``2 i + 1``
    (antisymmetric part) of the configured seed.
    """

    def __init__(self, mesh_half: Mesh, config: GrfConfig, centerline_attr: int = CENTERLINE):
        if centerline_attr not in set(mesh_half.boundary_attributes.tolist()):
            raise ConfigurationError(
                f"half-domain mesh has no boundary faces with centerline attribute "
                f"{centerline_attr}")
        self.centerline_attr = centerline_attr
        self.sym = GrfSampler(mesh_half, _with_centerline(config, centerline_attr, False))
        self.anti = GrfSampler(mesh_half, _with_centerline(config, centerline_attr, True))

    def pair(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        return self.sym.sample(2 * index).values, self.anti.sample(2 * index + 1).values

    def pairs(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """``(F_s, F_a)`` with one column per pair."""
        cols = [self.pair(i) for i in range(n)]
        return (np.column_stack([c[0] for c in cols]), np.column_stack([c[1] for c in cols]))


def symmetrized_load_pair(mesh_half: Mesh, grf_config: GrfConfig, sample_index: int,
                          centerline_attr: int = CENTERLINE):
    return SymmetrizedSampler(mesh_half, grf_config, centerline_attr).pair(sample_index)


def mirrored_pair(f_s, f_a, idx, side) -> tuple[np.ndarray, np.ndarray]:
    """Full-domain ``(f, f_bar)`` from half-domain parts."""
    s = np.asarray(f_s)[idx]
    a = side * np.asarray(f_a)[idx]
    return (s + a) / np.sqrt(2.0), (s - a) / np.sqrt(2.0)


def reflect(values_half, idx) -> np.ndarray:
    """Extend a symmetric half-domain nodal field to the full domain."""
    return np.asarray(values_half)[idx]
