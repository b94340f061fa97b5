"""Legacy-VTK ASCII and Wavefront OBJ mesh/field I/O.

VTK files are written as ``DATASET UNSTRUCTURED_GRID`` with 17 significant
digits, so reading a file back reproduces coordinates and values exactly.
Boundary faces are stored as lower-dimensional cells tagged by a
``boundary_attribute`` cell array (0 on volume cells). The title line
carries ``ambient_dim=<s>`` so that planar meshes come back with their
original coordinate dimension.
"""

from __future__ import annotations

import os
import re
from pathlib import Path

import numpy as np

from .errors import MeshIOError
from .mesh import ELEMENT_KINDS, Mesh

VTK_VERTEX, VTK_LINE, VTK_TRIANGLE, VTK_QUAD = 1, 3, 5, 9
_KIND_TO_VTK = {"segment": VTK_LINE, "triangle": VTK_TRIANGLE, "quad": VTK_QUAD}
_VTK_TO_KIND = {VTK_LINE: "segment", VTK_TRIANGLE: "triangle", VTK_QUAD: "quad"}
_VTK_SIZE = {VTK_VERTEX: 1, VTK_LINE: 2, VTK_TRIANGLE: 3, VTK_QUAD: 4}
_VTK_DIM = {VTK_VERTEX: 0, VTK_LINE: 1, VTK_TRIANGLE: 2, VTK_QUAD: 2}
_FACE_TYPE = {1: VTK_VERTEX, 2: VTK_LINE}

_AMBIENT_RE = re.compile(r"ambient_dim=(\d)")


def _fmt(x) -> str:
    return "%.17g" % x


def write_vtk(path, mesh: Mesh, point_data: dict | None = None, title: str = "maternspde"):
    """Write ``mesh`` plus named nodal arrays (float64 or integer)."""
    point_data = dict(point_data or {})
    if mesh.vertex_attributes is not None and "vertex_attribute" not in point_data:
        point_data["vertex_attribute"] = mesh.vertex_attributes
    n = mesh.num_nodes
    xyz = np.zeros((n, 3))
    xyz[:, :mesh.ambient_dim] = mesh.nodes
    faces = mesh.boundary_faces
    d = mesh.intrinsic_dim
    ncell = mesh.num_elements + len(faces)
    nv = mesh.nodes_per_element
    size = mesh.num_elements * (nv + 1) + len(faces) * (faces.shape[1] + 1)

    out = ["# vtk DataFile Version 3.0",
           f"{title.splitlines()[0] if title else 'maternspde'} ambient_dim={mesh.ambient_dim}",
           "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    out += [" ".join(map(_fmt, p)) for p in xyz]
    out.append(f"CELLS {ncell} {size}")
    out += [f"{nv} " + " ".join(map(str, e)) for e in mesh.elements]
    out += [f"{faces.shape[1]} " + " ".join(map(str, f)) for f in faces]
    out.append(f"CELL_TYPES {ncell}")
    out += [str(_KIND_TO_VTK[mesh.kind])] * mesh.num_elements
    out += [str(_FACE_TYPE[d])] * len(faces)
    if len(faces):
        out += [f"CELL_DATA {ncell}", "SCALARS boundary_attribute int 1",
                "LOOKUP_TABLE default"]
        out += ["0"] * mesh.num_elements + [str(a) for a in mesh.boundary_attributes]
    if point_data:
        out.append(f"POINT_DATA {n}")
        for name, values in point_data.items():
            v = np.asarray(values)
            if v.shape != (n,):
                raise MeshIOError(f"point array {name!r} has shape {v.shape}, expected ({n},)",
                                  path=str(path))
            if " " in name:
                raise MeshIOError(f"array name {name!r} contains whitespace", path=str(path))
            if np.issubdtype(v.dtype, np.integer):
                out += [f"SCALARS {name} int 1", "LOOKUP_TABLE default"]
                out += [str(int(x)) for x in v]
            else:
                out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                out += [_fmt(x) for x in v.astype(float)]
    try:
        Path(path).write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise MeshIOError(f"cannot write {path}: {exc}", path=str(path)) from exc


class _Tokens:
    """Whitespace token stream that remembers line numbers."""

    def __init__(self, text: str, path: str):
        self.path = path
        self.items = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self.items.append((tok, lineno))
        self.pos = 0

    def error(self, msg, line=None):
        if line is None:
            line = self.items[min(self.pos, len(self.items) - 1)][1] if self.items else 0
        return MeshIOError(f"{self.path}:{line}: {msg}", path=self.path, line=line)

    def done(self) -> bool:
        return self.pos >= len(self.items)

    def peek(self):
        return self.items[self.pos][0] if not self.done() else None

    def next(self):
        if self.done():
            raise self.error("unexpected end of file")
        tok, _ = self.items[self.pos]
        self.pos += 1
        return tok

    @property
    def line(self):
        return self.items[min(self.pos, len(self.items) - 1)][1]

    def expect(self, word):
        tok = self.next()
        if tok.upper() != word:
            raise self.error(f"expected {word!r}, found {tok!r}", self.items[self.pos - 1][1])

    def ints(self, count):
        try:
            return [int(self.next()) for _ in range(count)]
        except ValueError:
            raise self.error("expected an integer", self.items[self.pos - 1][1]) from None

    def floats(self, count):
        try:
            return np.array([float(self.next()) for _ in range(count)])
        except ValueError:
            raise self.error("expected a number", self.items[self.pos - 1][1]) from None


def read_vtk(path) -> tuple[Mesh, dict]:
    """Read a legacy-VTK ASCII unstructured grid; returns ``(mesh, point_data)``."""
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MeshIOError(f"cannot read {path}: {exc}", path=path) from exc
    lines = text.splitlines()
    if len(lines) < 4 or not lines[0].lower().startswith("# vtk datafile"):
        raise MeshIOError(f"{path}:1: not a legacy VTK file", path=path, line=1)
    match = _AMBIENT_RE.search(lines[1])
    ambient = int(match.group(1)) if match else None
    if lines[2].strip().upper() != "ASCII":
        raise MeshIOError(f"{path}:3: only ASCII VTK files are supported", path=path, line=3)
    tok = _Tokens("\n".join([""] * 3 + lines[3:]), path)
    tok.expect("DATASET")
    if tok.next().upper() != "UNSTRUCTURED_GRID":
        raise tok.error("only DATASET UNSTRUCTURED_GRID is supported", tok.items[tok.pos - 1][1])

    points = conn = types = None
    cell_lines = []
    point_data, cell_data = {}, {}
    section = None
    while not tok.done():
        word = tok.next().upper()
        if word == "POINTS":
            n = tok.ints(1)[0]
            tok.next()  # data type
            points = tok.floats(3 * n).reshape(n, 3)
        elif word == "CELLS":
            ncell, _ = tok.ints(2)
            conn = []
            for _ in range(ncell):
                line = tok.line
                k = tok.ints(1)[0]
                conn.append(tok.ints(k))
                cell_lines.append(line)
        elif word == "CELL_TYPES":
            ncell = tok.ints(1)[0]
            types = tok.ints(ncell)
        elif word in ("POINT_DATA", "CELL_DATA"):
            tok.ints(1)
            section = point_data if word == "POINT_DATA" else cell_data
        elif word == "SCALARS":
            if section is None:
                raise tok.error("SCALARS outside a POINT_DATA/CELL_DATA section")
            name, dtype = tok.next(), tok.next().lower()
            if tok.peek() is not None and tok.peek().isdigit():
                if tok.ints(1)[0] != 1:
                    raise tok.error("only single-component scalars are supported")
            if tok.peek() and tok.peek().upper() == "LOOKUP_TABLE":
                tok.next()
                tok.next()
            count = len(points) if section is point_data else len(types)
            vals = tok.floats(count)
            is_int = dtype in ("int", "long", "short", "unsigned_int", "unsigned_long",
                               "char", "unsigned_char", "vtkidtype")
            section[name] = vals.astype(np.int64) if is_int else vals
        else:
            raise tok.error(f"unsupported keyword {word!r}", tok.items[tok.pos - 1][1])

    if points is None or conn is None or types is None:
        raise MeshIOError(f"{path}: missing POINTS, CELLS or CELL_TYPES section", path=path)
    if len(types) != len(conn):
        raise MeshIOError(f"{path}: CELLS and CELL_TYPES counts differ", path=path)
    for t, c, line in zip(types, conn, cell_lines):
        if t not in _VTK_SIZE:
            raise MeshIOError(f"{path}:{line}: unsupported cell type {t} with {len(c)} nodes",
                              path=path, line=line)
        if len(c) != _VTK_SIZE[t]:
            raise MeshIOError(f"{path}:{line}: cell type {t} needs {_VTK_SIZE[t]} nodes, "
                              f"got {len(c)}", path=path, line=line)
    dims = np.array([_VTK_DIM[t] for t in types])
    top = dims.max()
    vol = np.flatnonzero(dims == top)
    kinds = {types[i] for i in vol}
    if top == 0 or len(kinds) != 1:
        raise MeshIOError(f"{path}: need cells of exactly one element kind, got types "
                          f"{sorted(kinds)}", path=path)
    kind = _VTK_TO_KIND[kinds.pop()]
    bnd = np.flatnonzero(dims == top - 1)
    if np.any(dims < top - 1):
        line = cell_lines[int(np.flatnonzero(dims < top - 1)[0])]
        raise MeshIOError(f"{path}:{line}: cell dimension inconsistent with {kind} mesh",
                          path=path, line=line)
    attrs = cell_data.get("boundary_attribute")
    battr = np.asarray(attrs)[bnd] if attrs is not None else np.ones(len(bnd), np.int64)

    if ambient is None:
        ambient = 3
        if kind != "triangle":
            while ambient > ELEMENT_KINDS[kind][1] and np.all(points[:, ambient - 1] == 0):
                ambient -= 1
    nodes = points[:, :ambient]
    vattr = point_data.pop("vertex_attribute", None)
    try:
        mesh = Mesh(nodes, np.array([conn[i] for i in vol]), kind,
                    np.array([conn[i] for i in bnd], dtype=np.int64).reshape(len(bnd), top),
                    battr, vattr)
    except Exception as exc:
        raise MeshIOError(f"{path}: invalid mesh: {exc}", path=path) from exc
    return mesh, point_data


def write_obj(path, mesh: Mesh):
    if mesh.kind != "triangle":
        raise MeshIOError("OBJ output supports triangle meshes only", path=str(path))
    xyz = np.zeros((mesh.num_nodes, 3))
    xyz[:, :mesh.ambient_dim] = mesh.nodes
    out = ["v " + " ".join(map(_fmt, p)) for p in xyz]
    out += ["f " + " ".join(str(i + 1) for i in e) for e in mesh.elements]
    try:
        Path(path).write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise MeshIOError(f"cannot write {path}: {exc}", path=str(path)) from exc


def read_obj(path) -> Mesh:
    """Read ``v``/``f`` records of a triangulated surface; other records are ignored."""
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MeshIOError(f"cannot read {path}: {exc}", path=path) from exc
    verts, faces = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
                if len(verts[-1]) != 3:
                    raise ValueError("vertex needs three coordinates")
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise MeshIOError(f"{path}:{lineno}: face with {len(idx)} vertices; only "
                                      f"triangles are supported", path=path, line=lineno)
                faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
        except ValueError as exc:
            raise MeshIOError(f"{path}:{lineno}: {exc}", path=path, line=lineno) from None
    if not faces:
        raise MeshIOError(f"{path}: no faces found", path=path)
    try:
        return Mesh(np.array(verts), np.array(faces), "triangle")
    except Exception as exc:
        raise MeshIOError(f"{path}: invalid mesh: {exc}", path=path) from exc


def load_mesh(path, format: str | None = None) -> Mesh:
    """Load a mesh from legacy VTK (``.vtk``) or OBJ (``.obj``)."""
    if format is None:
        ext = os.path.splitext(str(path))[1].lower()
        format = {".vtk": "vtk_legacy_ascii", ".obj": "obj"}.get(ext)
        if format is None:
            raise MeshIOError(f"cannot infer mesh format from extension of {path}",
                              path=str(path))
    if format == "vtk_legacy_ascii":
        return read_vtk(path)[0]
    if format == "obj":
        return read_obj(path)
    raise MeshIOError(f"unknown mesh format {format!r}", path=str(path))


def write_mesh(path, mesh: Mesh, point_data: dict | None = None):
    if str(path).lower().endswith(".obj"):
        write_obj(path, mesh)
    else:
        write_vtk(path, mesh, point_data)
