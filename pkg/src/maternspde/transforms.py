"""Pointwise and geometric post-processing of sampled fields."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError
from .grf import FieldSample
from .mesh import Mesh, face_normals, vertex_normals


@dataclass(frozen=True)
class ThresholdSpec:
    """Indicator of the half-open band ``[lower, upper)``."""

    lower: float
    upper: float = math.inf
    inside: float = 1.0
    outside: float = 0.0

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ConfigurationError(f"threshold needs lower < upper, got "
                                     f"({self.lower}, {self.upper})")


@dataclass(frozen=True)
class PerturbSpec:
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ConfigurationError(f"perturbation scale must be positive, got {self.scale}")


def _values(field) -> np.ndarray:
    return np.asarray(field.values if isinstance(field, FieldSample) else field, dtype=float)


def _wrap(field, values):
    if isinstance(field, FieldSample):
        return replace(field, values=values)
    return values


def threshold(field, spec: ThresholdSpec):
    v = _values(field)
    out = np.where((v >= spec.lower) & (v < spec.upper), spec.inside, spec.outside)
    return _wrap(field, out.astype(float))


def combine_fields(fields: Sequence, mode: str = "sum", post: ThresholdSpec | None = None):
    """Pointwise sum or max of fields on a common mesh, optionally thresholded."""
    if not fields:
        raise ConfigurationError("combine_fields needs at least one field")
    if mode not in ("sum", "max"):
        raise ConfigurationError(f"unknown combination mode {mode!r}")
    arrays = [_values(f) for f in fields]
    if len({a.shape for a in arrays}) != 1:
        raise ConfigurationError("fields live on different meshes (node counts differ)")
    stack = np.stack(arrays)
    out = stack.sum(axis=0) if mode == "sum" else stack.max(axis=0)
    out = _wrap(fields[0], out)
    return threshold(out, post) if post is not None else out


def displace_vertices(mesh: Mesh, field, spec: PerturbSpec, warnings_out: list | None = None
                      ) -> Mesh:
    """Move each surface vertex along its normal by ``scale * u``.

    Faces whose normal flips or whose area collapses are reported in
    ``warnings_out`` (when given); collisions between distant faces are not
    detected.
    """
    if mesh.kind != "triangle" or mesh.ambient_dim != 3:
        raise DomainError("vertex displacement needs a triangulated surface in 3D")
    u = _values(field)
    if u.shape != (mesh.num_nodes,):
        raise ConfigurationError("field must hold one value per mesh node")
    nodes = mesh.nodes + spec.scale * u[:, None] * vertex_normals(mesh)
    before = face_normals(mesh)
    x = nodes[mesh.elements]
    cross = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    area = 0.5 * np.linalg.norm(cross, axis=1)
    flipped = np.einsum("ij,ij->i", cross, before) <= 0
    bad = np.flatnonzero(flipped | (area <= 1e-14 * max(mesh.element_measures().max(), 1.0)))
    if warnings_out is not None:
        warnings_out.extend(f"face {i} inverted or degenerate after displacement"
                            for i in bad)
    if bad.size:
        # keep the data but skip the positive-measure validation of Mesh
        moved = object.__new__(Mesh)
        for name in ("elements", "kind", "boundary_faces", "boundary_attributes",
                     "vertex_attributes"):
            object.__setattr__(moved, name, getattr(mesh, name))
        nodes.setflags(write=False)
        object.__setattr__(moved, "nodes", nodes)
        object.__setattr__(moved, "_measures", area)
        return moved
    return mesh.with_nodes(nodes)
