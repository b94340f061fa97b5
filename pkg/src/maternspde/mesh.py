"""Computational domains: structured generators, icospheres and geometric queries.

A mesh holds a single element kind. Nodes live in an ambient space of
dimension ``s`` and elements have intrinsic dimension ``d <= s``; ``d < s``
marks an embedded manifold (triangulated surfaces in 3D). Only first-order
straight-edged geometry is represented.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateGeometryError, DomainError

#: nodes per element for each supported kind, and its intrinsic dimension
ELEMENT_KINDS = {"segment": (2, 1), "triangle": (3, 2), "quad": (4, 2)}

_PLANARITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable unstructured mesh with one element kind.

    ``boundary_faces`` has shape ``(nf, d)``: node pairs for 2D meshes, single
    nodes for 1D meshes. ``boundary_attributes`` holds one integer label per
    face.
    """

    nodes: np.ndarray
    elements: np.ndarray
    kind: str
    boundary_faces: np.ndarray = None
    boundary_attributes: np.ndarray = None
    vertex_attributes: np.ndarray | None = None

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=np.float64)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        if self.kind not in ELEMENT_KINDS:
            raise ConfigurationError(f"unsupported element kind {self.kind!r}")
        nv, d = ELEMENT_KINDS[self.kind]
        elements = np.ascontiguousarray(self.elements, dtype=np.int64).reshape(-1, nv)
        s = nodes.shape[1]
        if s not in (1, 2, 3) or d > s:
            raise ConfigurationError(
                f"{self.kind} elements cannot live in {s}-dimensional space")
        if self.kind == "quad" and s == 3:
            raise ConfigurationError("quad elements on embedded surfaces are not supported; "
                                     "triangulate the surface")
        if elements.size and (elements.min() < 0 or elements.max() >= len(nodes)):
            raise ConfigurationError("element node index out of range")
        if self.boundary_faces is None:
            faces = np.zeros((0, d), dtype=np.int64)
        else:
            faces = np.ascontiguousarray(self.boundary_faces, dtype=np.int64).reshape(-1, d)
        if self.boundary_attributes is None:
            attrs = np.ones(len(faces), dtype=np.int64)
        else:
            attrs = np.ascontiguousarray(self.boundary_attributes, dtype=np.int64).ravel()
        if len(attrs) != len(faces):
            raise ConfigurationError("one boundary attribute per boundary face required")
        if faces.size and (faces.min() < 0 or faces.max() >= len(nodes)):
            raise ConfigurationError("boundary face node index out of range")
        vattr = self.vertex_attributes
        if vattr is not None:
            vattr = np.asarray(vattr, dtype=np.int64).ravel()
            if len(vattr) != len(nodes):
                raise ConfigurationError("one vertex attribute per node required")
        for name, value in (("nodes", nodes), ("elements", elements),
                            ("boundary_faces", faces), ("boundary_attributes", attrs),
                            ("vertex_attributes", vattr)):
            if value is not None:
                value.setflags(write=False)
            object.__setattr__(self, name, value)

        measures = _measures(nodes, elements, self.kind)
        bad = np.flatnonzero(~(measures > 0))
        if bad.size:
            raise DegenerateGeometryError(
                f"element {bad[0]} has non-positive measure", element=int(bad[0]))
        measures.setflags(write=False)
        object.__setattr__(self, "_measures", measures)

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def intrinsic_dim(self) -> int:
        return ELEMENT_KINDS[self.kind][1]

    @property
    def is_embedded(self) -> bool:
        return self.intrinsic_dim < self.ambient_dim

    @property
    def nodes_per_element(self) -> int:
        return self.elements.shape[1]

    def element_measures(self) -> np.ndarray:
        return self._measures

    def total_measure(self) -> float:
        return float(self._measures.sum())

    def boundary_nodes(self, attributes: Sequence[int] | None = None) -> np.ndarray:
        """Sorted unique node indices on faces carrying any of ``attributes``.

        ``None`` selects every boundary face.
        """
        faces = self.boundary_faces
        if attributes is not None:
            faces = faces[np.isin(self.boundary_attributes, list(attributes))]
        return np.unique(faces.ravel())

    def with_boundary(self, faces, attributes) -> "Mesh":
        return Mesh(self.nodes, self.elements, self.kind, faces, attributes,
                    self.vertex_attributes)

    def with_nodes(self, nodes) -> "Mesh":
        return Mesh(nodes, self.elements, self.kind, self.boundary_faces,
                    self.boundary_attributes, self.vertex_attributes)


def _measures(nodes, elements, kind):
    x = nodes[elements]
    if kind == "segment":
        return np.linalg.norm(x[:, 1] - x[:, 0], axis=-1)
    if kind == "triangle":
        return 0.5 * _cross_norm(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    # planar quad: split along the 0-2 diagonal, signed for 2D so that
    # inverted quads are caught
    a = _cross_signed(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    b = _cross_signed(x[:, 2] - x[:, 0], x[:, 3] - x[:, 0])
    return 0.5 * (a + b)


def _cross_signed(u, v):
    return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]


def _cross_norm(u, v):
    if u.shape[1] == 2:
        return np.abs(_cross_signed(u, v))
    return np.linalg.norm(np.cross(u, v), axis=-1)


def element_measure(mesh: Mesh, elem: int) -> float:
    """Length or area of element ``elem`` measured in ambient coordinates."""
    if not 0 <= elem < mesh.num_elements:
        raise IndexError(f"element index {elem} out of range")
    return float(mesh.element_measures()[elem])


@dataclass(frozen=True)
class StructuredGridSpec:
    lower: Sequence[float]
    upper: Sequence[float]
    cells: Sequence[int]
    kind: str | None = None

    def validate(self):
        if not (len(self.lower) == len(self.upper) == len(self.cells)):
            raise ConfigurationError("lower, upper and cells must have equal length")
        if len(self.cells) not in (1, 2):
            raise ConfigurationError("structured grids are 1D or 2D")
        if any(int(c) < 1 for c in self.cells):
            raise ConfigurationError("cells per axis must be >= 1")
        if any(not hi > lo for lo, hi in zip(self.lower, self.upper)):
            raise ConfigurationError("upper corner must exceed lower corner on every axis")
        expected = "segment" if len(self.cells) == 1 else "quad"
        if self.kind is not None and self.kind != expected:
            raise ConfigurationError(f"{len(self.cells)}D structured grids use {expected} elements")


def generate_structured_grid(spec: StructuredGridSpec) -> Mesh:
    """Tensor-product grid with lexicographic node numbering (x fastest).

    Boundary attributes: 1 at x=lower, 2 at x=upper, and in 2D 3 at y=lower,
    4 at y=upper.
    """
    spec.validate()
    if len(spec.cells) == 1:
        n = int(spec.cells[0])
        x = np.linspace(spec.lower[0], spec.upper[0], n + 1)
        elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
        faces = np.array([[0], [n]])
        return Mesh(x[:, None], elements, "segment", faces, [1, 2])

    nx, ny = (int(c) for c in spec.cells)
    x = np.linspace(spec.lower[0], spec.upper[0], nx + 1)
    y = np.linspace(spec.lower[1], spec.upper[1], ny + 1)
    X, Y = np.meshgrid(x, y)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    elements = np.column_stack([idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel(),
                                idx[1:, 1:].ravel(), idx[1:, :-1].ravel()])
    left = np.column_stack([idx[1:, 0], idx[:-1, 0]])
    right = np.column_stack([idx[:-1, -1], idx[1:, -1]])
    bottom = np.column_stack([idx[0, :-1], idx[0, 1:]])
    top = np.column_stack([idx[-1, 1:], idx[-1, :-1]])
    faces = np.vstack([left, right, bottom, top])
    attrs = np.repeat([1, 2, 3, 4], [ny, ny, nx, nx])
    return Mesh(nodes, elements, "quad", faces, attrs)


def unit_interval(cells: int, lower=0.0, upper=1.0) -> Mesh:
    return generate_structured_grid(StructuredGridSpec([lower], [upper], [cells]))


def rectangle(cells_x: int, cells_y: int, lower=(0.0, 0.0), upper=(1.0, 1.0)) -> Mesh:
    return generate_structured_grid(StructuredGridSpec(lower, upper, [cells_x, cells_y]))


def triangulate_quads(mesh: Mesh) -> Mesh:
    """Split every quad along its 0-2 diagonal; boundary is kept."""
    if mesh.kind != "quad":
        raise DomainError("triangulate_quads expects a quad mesh")
    e = mesh.elements
    tris = np.vstack([e[:, [0, 1, 2]], e[:, [0, 2, 3]]])
    return Mesh(mesh.nodes, tris, "triangle", mesh.boundary_faces,
                mesh.boundary_attributes, mesh.vertex_attributes)


def embed_in_3d(mesh: Mesh, z: float = 0.0) -> Mesh:
    """Lift a planar triangle mesh into the plane ``z`` of 3D space."""
    if mesh.ambient_dim != 2 or mesh.kind != "triangle":
        raise DomainError("embed_in_3d expects a planar triangle mesh")
    nodes = np.column_stack([mesh.nodes, np.full(mesh.num_nodes, float(z))])
    return Mesh(nodes, mesh.elements, "triangle", mesh.boundary_faces,
                mesh.boundary_attributes, mesh.vertex_attributes)


_ICO_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])


def icosahedron(radius: float = 1.0) -> Mesh:
    t = (1.0 + 5.0 ** 0.5) / 2.0
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    v *= radius / np.linalg.norm(v, axis=1, keepdims=True)
    return Mesh(v, _ICO_FACES, "triangle")


def icosphere(level: int, radius: float = 1.0) -> Mesh:
    """Subdivided icosahedron with all vertices projected onto the sphere.

    Every level splits each triangle into four. Nodes 0..11 are the
    original icosahedron vertices (the valence-5 vertices).
    """
    if level < 0:
        raise ConfigurationError("icosphere level must be >= 0")
    base = icosahedron(1.0)
    verts = [row for row in base.nodes]
    faces = base.elements
    for _ in range(level):
        cache = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces.tolist():
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new)
    return Mesh(radius * np.array(verts), faces, "triangle")


def face_normals(mesh: Mesh) -> np.ndarray:
    """Unit normals of the triangles of an embedded surface, from winding order."""
    _require_surface(mesh)
    x = mesh.nodes[mesh.elements]
    n = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def vertex_normals(mesh: Mesh) -> np.ndarray:
    """Per-node unit normal: normalized average of the incident face normals."""
    fn = face_normals(mesh)
    acc = np.zeros((mesh.num_nodes, 3))
    for j in range(3):
        np.add.at(acc, mesh.elements[:, j], fn)
    norm = np.linalg.norm(acc, axis=1)
    bad = np.flatnonzero(norm <= 1e-12)
    if bad.size:
        raise DegenerateGeometryError(
            f"average normal vanishes at vertex {bad[0]} (surface folds back or node unused)")
    return acc / norm[:, None]


def _require_surface(mesh: Mesh):
    if not (mesh.kind == "triangle" and mesh.ambient_dim == 3):
        raise DomainError("operation requires a triangulated surface embedded in 3D")


def mark_boundary_segment(mesh: Mesh, attribute: int, new_attribute: int,
                          axis: int, lo: float, hi: float) -> tuple[Mesh, float]:
    """Relabel the part of a boundary that overlaps the coordinate range ``(lo, hi)``.

    Faces carrying ``attribute`` whose extent along ``axis`` overlaps the open
    interval are snapped outward into ``new_attribute``. Returns the new mesh
    and the realized length of the relabelled part.
    """
    faces = mesh.boundary_faces
    attrs = mesh.boundary_attributes.copy()
    coords = mesh.nodes[faces, axis]
    fmin, fmax = coords.min(axis=1), coords.max(axis=1)
    hit = (attrs == attribute) & (fmax > lo) & (fmin < hi)
    if not hit.any():
        raise ConfigurationError("boundary segment does not overlap any face")
    attrs[hit] = new_attribute
    realized = float(fmax[hit].max() - fmin[hit].min())
    return mesh.with_boundary(faces, attrs), realized


def surface_boundary_edges(elements) -> np.ndarray:
    """Edges used by exactly one triangle, oriented as in that triangle."""
    e = np.asarray(elements)
    edges = np.vstack([e[:, [0, 1]], e[:, [1, 2]], e[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return edges[counts[inverse.ravel()] == 1]


def cut_sphere(level: int, z_cut: float = 0.0, radius: float = 1.0) -> Mesh:
    """Icosphere with every triangle whose centroid lies below ``z_cut`` removed.

    The open rim gets boundary attribute 1. Unused vertices are dropped.
    """
    full = icosphere(level, radius)
    keep = full.nodes[full.elements].mean(axis=1)[:, 2] >= z_cut * radius
    tris = full.elements[keep]
    used = np.unique(tris)
    remap = np.full(full.num_nodes, -1)
    remap[used] = np.arange(len(used))
    tris = remap[tris]
    rim = surface_boundary_edges(tris)
    return Mesh(full.nodes[used], tris, "triangle", rim, np.ones(len(rim), dtype=np.int64))
