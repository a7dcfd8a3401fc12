import numpy as np
import pytest
from mesh_spectra.errors import MeshStructureError
from mesh_spectra.fixtures import make_disc_fixture, make_icosphere
from mesh_spectra.mesh_core import (
    MeshGraph,
    TriangleMesh,
    build_graph,
    edge_table,
    refine_faces,
    validate,
)

TRIANGLE = TriangleMesh(
    vertices=[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    faces=[[0, 1, 2]],
)


def _two_triangles() -> TriangleMesh:
    return TriangleMesh(
        vertices=[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]],
        faces=[[0, 1, 2], [1, 3, 2]],
    )


def test_single_triangle_graph_and_report() -> None:
    graph = build_graph(TRIANGLE)
    assert graph.edge_count == 3
    assert graph.edge_set() == {(0, 1), (0, 2), (1, 2)}

    report = validate(TRIANGLE)
    assert report.euler_characteristic == 1
    assert report.boundary_edge_count == 3
    assert report.non_manifold_edge_count == 0
    assert report.connected_component_count == 1
    assert report.warnings == ()


def test_shared_edge_is_counted_once() -> None:
    graph = build_graph(_two_triangles())
    assert graph.edge_count == 5
    np.testing.assert_array_equal(graph.degrees(), [2, 3, 3, 2])


def test_icosahedron_is_closed_genus_zero() -> None:
    report = validate(make_icosphere(0))
    assert (report.vertex_count, report.edge_count, report.face_count) == (12, 30, 20)
    assert report.euler_characteristic == 2
    assert report.boundary_edge_count == 0


def test_hand_scale_disc_counts() -> None:
    mesh = make_disc_fixture(778, 1538, 16)
    assert build_graph(mesh).edge_count == 2315

    report = validate(mesh)
    assert report.euler_characteristic == 1
    assert report.boundary_edge_count == 16
    assert report.connected_component_count == 1


def test_mesh_rejects_out_of_range_and_repeated_indices() -> None:
    with pytest.raises(MeshStructureError, match="outside"):
        TriangleMesh(vertices=TRIANGLE.vertices, faces=[[0, 1, 3]])
    with pytest.raises(MeshStructureError, match="repeats"):
        TriangleMesh(vertices=TRIANGLE.vertices, faces=[[0, 1, 1]])
    with pytest.raises(ValueError, match="shape"):
        TriangleMesh(vertices=[[0.0, 0.0]], faces=[])


def test_mesh_arrays_are_read_only_and_hash_tracks_positions() -> None:
    assert not TRIANGLE.vertices.flags.writeable
    assert not TRIANGLE.faces.flags.writeable

    moved = TRIANGLE.with_vertices(TRIANGLE.vertices + 1.0)
    assert moved.content_hash() != TRIANGLE.content_hash()
    assert TRIANGLE.with_vertices(TRIANGLE.vertices).content_hash() == TRIANGLE.content_hash()


def test_edge_table_is_sorted_and_independent_of_face_order() -> None:
    mesh = make_icosphere(1)
    edges, face_edges = edge_table(mesh.faces)
    shuffled = mesh.faces[np.random.default_rng(3).permutation(mesh.face_count)]
    edges_shuffled, _ = edge_table(shuffled)

    np.testing.assert_array_equal(edges, edges_shuffled)
    assert np.all(edges[:, 0] < edges[:, 1])
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    np.testing.assert_array_equal(order, np.arange(edges.shape[0]))

    for face, rows in zip(mesh.faces, face_edges, strict=True):
        for (i, j), row in zip(((0, 1), (1, 2), (2, 0)), rows, strict=True):
            assert tuple(edges[row]) == tuple(sorted((face[i], face[j])))


def test_refine_faces_quadruples_and_keeps_orientation() -> None:
    edges, face_edges = edge_table(TRIANGLE.faces)
    refined = refine_faces(TRIANGLE.faces, face_edges, TRIANGLE.vertex_count)
    assert refined.shape == (4, 3)
    assert set(refined.reshape(-1).tolist()) == set(range(3 + edges.shape[0]))
    assert refined[0, 0] == 0 and refined[1, 0] == 1 and refined[2, 0] == 2


def test_non_manifold_edge_is_reported() -> None:
    mesh = TriangleMesh(
        vertices=np.random.default_rng(0).normal(size=(5, 3)),
        faces=[[0, 1, 2], [0, 1, 3], [0, 1, 4]],
    )
    report = validate(mesh)
    assert report.non_manifold_edge_count == 1
    assert any("non-manifold" in warning for warning in report.warnings)
    assert report.to_dict()["non_manifold_edge_count"] == 1


def test_unused_vertices_and_components() -> None:
    mesh = TriangleMesh(
        vertices=np.vstack([TRIANGLE.vertices, [[5.0, 5.0, 5.0]]]),
        faces=TRIANGLE.faces,
    )
    report = validate(mesh)
    assert report.connected_component_count == 2
    assert any("not used" in warning for warning in report.warnings)


def test_graph_adjacency_is_symmetric_and_deduplicated() -> None:
    graph = MeshGraph(vertex_count=4, edges=[[1, 0], [0, 1], [2, 3]])
    assert graph.edge_count == 2
    adjacency = graph.adjacency().toarray()
    np.testing.assert_array_equal(adjacency, adjacency.T)
    assert adjacency.sum() == 4.0

    with pytest.raises(ValueError):
        MeshGraph(vertex_count=2, edges=[[0, 0]])
    with pytest.raises(ValueError):
        MeshGraph(vertex_count=2, edges=[[0, 2]])
