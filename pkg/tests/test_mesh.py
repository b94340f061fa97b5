import math

import numpy as np
import pytest

from maternspde.errors import ConfigurationError, DegenerateGeometryError, DomainError
from maternspde.mesh import (Mesh, StructuredGridSpec, cut_sphere, element_measure,
                             embed_in_3d, face_normals, generate_structured_grid, icosahedron,
                             icosphere, mark_boundary_segment, rectangle, surface_boundary_edges,
                             triangulate_quads, unit_interval, vertex_normals)


def test_interval_two_cells():
    m = generate_structured_grid(StructuredGridSpec([0.0], [1.0], [2]))
    np.testing.assert_array_equal(m.nodes[:, 0], [0.0, 0.5, 1.0])
    assert m.num_elements == 2 and m.kind == "segment"
    assert m.intrinsic_dim == 1 and m.ambient_dim == 1


def test_square_two_by_two_counts():
    m = generate_structured_grid(StructuredGridSpec([0, 0], [1, 1], [2, 2]))
    assert (m.num_nodes, m.num_elements, len(m.boundary_faces)) == (9, 4, 8)


def test_heat_sink_grid_counts():
    m = rectangle(128, 128, (-0.5, -0.5), (0.5, 0.5))
    assert (m.num_nodes, m.num_elements) == (16641, 16384)
    assert m.total_measure() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("spec", [
    StructuredGridSpec([0.0], [1.0], [0]),
    StructuredGridSpec([1.0], [0.0], [3]),
    StructuredGridSpec([0, 0], [1, 1], [2]),
    StructuredGridSpec([0, 0, 0], [1, 1, 1], [1, 1, 1]),
    StructuredGridSpec([0.0], [1.0], [2], kind="quad"),
])
def test_invalid_grid_spec(spec):
    with pytest.raises(ConfigurationError):
        generate_structured_grid(spec)


def test_boundary_attributes_cover_all_sides():
    m = rectangle(3, 2)
    assert sorted(set(m.boundary_attributes.tolist())) == [1, 2, 3, 4]
    assert len(m.boundary_nodes()) == 2 * (4 + 3) - 4


def test_element_measures():
    seg = Mesh(np.array([[0.0], [0.5]]), np.array([[0, 1]]), "segment")
    assert element_measure(seg, 0) == pytest.approx(0.5)
    tri = Mesh(np.array([[0, 0], [1, 0], [0, 1.0]]), np.array([[0, 1, 2]]), "triangle")
    assert element_measure(tri, 0) == pytest.approx(0.5)
    emb = Mesh(np.array([[0, 0, 0], [1, 0, 0], [0, 0, 1.0]]), np.array([[0, 1, 2]]), "triangle")
    assert element_measure(emb, 0) == pytest.approx(0.5)
    assert emb.is_embedded and emb.intrinsic_dim == 2 and emb.ambient_dim == 3


def test_degenerate_element_rejected():
    nodes = np.array([[0, 0], [1, 1], [2, 2.0]])
    with pytest.raises(DegenerateGeometryError):
        Mesh(nodes, np.array([[0, 1, 2]]), "triangle")


def test_triangulate_preserves_area(square4):
    t = triangulate_quads(square4)
    assert t.num_elements == 2 * square4.num_elements
    assert t.total_measure() == pytest.approx(square4.total_measure())


def test_flat_normals(flat_surface):
    np.testing.assert_allclose(face_normals(flat_surface), [[0, 0, 1]] * 2)
    np.testing.assert_allclose(vertex_normals(flat_surface), [[0, 0, 1]] * 4)


def test_single_triangle_normals():
    m = Mesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]]), np.array([[0, 1, 2]]), "triangle")
    np.testing.assert_allclose(vertex_normals(m), [[0, 0, 1]] * 3)


def test_sphere_normals_are_radial():
    m = icosphere(3)
    assert np.max(np.abs(vertex_normals(m) - m.nodes)) < 1e-2


def test_normals_need_surface(square4):
    with pytest.raises(DomainError):
        vertex_normals(square4)


def test_icosahedron_is_closed():
    m = icosahedron()
    assert (m.num_nodes, m.num_elements, len(m.boundary_faces)) == (12, 20, 0)
    assert len(surface_boundary_edges(m.elements)) == 0


def test_icosphere_area_converges():
    err = [abs(icosphere(k).total_measure() - 4 * math.pi) / (4 * math.pi) for k in (2, 3, 4)]
    assert err[0] > err[1] > err[2]
    assert err[2] < 0.01


def test_cut_sphere_has_rim():
    m = cut_sphere(3)
    assert np.all(m.nodes[:, 2] >= -0.2)
    assert len(m.boundary_faces) > 0
    assert set(m.boundary_attributes.tolist()) == {1}


def test_embed_in_3d(square4):
    e = embed_in_3d(triangulate_quads(square4), z=2.0)
    assert e.ambient_dim == 3 and np.all(e.nodes[:, 2] == 2.0)


def test_mark_boundary_segment_snaps_outward():
    m = rectangle(8, 8, (-0.5, -0.5), (0.5, 0.5))
    marked, length = mark_boundary_segment(m, 3, 5, 0, -0.1, 0.1)
    # faces are 1/8 wide; any face overlapping (-0.1, 0.1) is taken
    assert length == pytest.approx(0.25)
    nodes = marked.boundary_nodes([5])
    np.testing.assert_allclose(np.sort(marked.nodes[nodes, 0]), [-0.125, 0.0, 0.125])
    assert np.all(marked.nodes[nodes, 1] == -0.5)


def test_with_nodes_keeps_topology(interval8):
    moved = interval8.with_nodes(interval8.nodes * 2)
    assert moved.total_measure() == pytest.approx(2.0)
    np.testing.assert_array_equal(moved.elements, interval8.elements)


def test_unit_interval_bounds():
    m = unit_interval(4, -1.0, 1.0)
    assert m.nodes.min() == -1.0 and m.nodes.max() == 1.0
