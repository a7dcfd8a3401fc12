import numpy as np
import pytest
from mesh_spectra import surface
from mesh_spectra.fixtures import disc_counts, make_disc_fixture, make_icosphere
from mesh_spectra.mesh_core import TriangleMesh
from mesh_spectra.surface import (
    SurfaceIndex,
    closest_point_on_surface,
    closest_points_on_triangles,
    snap_to_surface,
)
from mesh_spectra.subdiv_model import subdivide_mesh
from scipy.spatial.transform import Rotation

TRIANGLE = TriangleMesh(
    vertices=[[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [0.0, 4.0, 0.0]],
    faces=[[0, 1, 2]],
)


def test_kernel_voronoi_regions() -> None:
    a, b, c = (TRIANGLE.vertices[i][None, :].repeat(5, axis=0) for i in range(3))
    points = np.array(
        [
            [-1.0, -1.0, 2.0],  # corner a
            [6.0, -1.0, 0.0],  # corner b
            [2.0, -3.0, 1.0],  # edge ab
            [3.0, 3.0, 0.0],  # edge bc
            [1.0, 1.0, 5.0],  # interior
        ]
    )
    expected = np.array(
        [[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [2.0, 0.0, 0.0], [2.0, 2.0, 0.0], [1.0, 1.0, 0.0]]
    )
    np.testing.assert_allclose(closest_points_on_triangles(a, b, c, points), expected, atol=1e-12)


def test_point_on_vertex_and_above_interior() -> None:
    index = SurfaceIndex(TRIANGLE)
    point, distance, face = closest_point_on_surface(np.array([4.0, 0.0, 0.0]), index)
    np.testing.assert_array_equal(point, [4.0, 0.0, 0.0])
    assert distance == 0.0 and face == 0

    point, distance, _ = closest_point_on_surface(np.array([1.0, 2.0, -3.0]), index)
    np.testing.assert_allclose(point, [1.0, 2.0, 0.0], atol=1e-12)
    assert distance == pytest.approx(3.0)


def test_pruned_query_matches_exhaustive_scan() -> None:
    index = SurfaceIndex(make_icosphere(2, radius=10.0))
    queries = np.random.default_rng(9).uniform(-15.0, 15.0, size=(100, 3))
    fast = index.query(queries)
    slow = index.query_exhaustive(queries)
    np.testing.assert_allclose(fast.distances, slow.distances, atol=1e-9)
    np.testing.assert_allclose(fast.points, slow.points, atol=1e-9)


def test_empty_queries_and_faceless_meshes() -> None:
    result = SurfaceIndex(TRIANGLE).query(np.empty((0, 3)))
    assert result.points.shape == (0, 3)
    with pytest.raises(ValueError):
        SurfaceIndex(TriangleMesh(vertices=[[0.0, 0.0, 0.0]]))


def test_snap_to_itself_is_identity() -> None:
    mesh = make_icosphere(1, radius=5.0)
    np.testing.assert_array_equal(snap_to_surface(mesh, mesh).vertices, mesh.vertices)


def test_snap_coarse_sphere_onto_fine_sphere() -> None:
    rotation = Rotation.from_rotvec([0.3, 0.2, 0.1]).as_matrix()
    coarse = make_icosphere(2, radius=10.0)
    coarse = coarse.with_vertices(coarse.vertices @ rotation.T)
    snapped = snap_to_surface(coarse, make_icosphere(4, radius=10.0))

    radii = np.linalg.norm(snapped.vertices, axis=1)
    assert np.all(radii <= 10.0 + 1e-9)
    assert np.all(radii >= 9.9)
    np.testing.assert_array_equal(snapped.faces, coarse.faces)


def test_sliver_faces_prune_by_their_own_radius(monkeypatch: pytest.MonkeyPatch) -> None:
    mesh = subdivide_mesh(make_disc_fixture(*disc_counts(200, 30)), 1)
    index = SurfaceIndex(mesh)
    rng = np.random.default_rng(4)
    picks = rng.choice(mesh.vertex_count, size=60, replace=False)
    queries = mesh.vertices[picks] + rng.normal(scale=2.0, size=(60, 3))

    slow = index.query_exhaustive(queries)
    fast = index.query(queries)
    np.testing.assert_allclose(fast.distances, slow.distances, atol=1e-9)

    bound = slow.distances + 1e-6
    query_ids, face_ids = index.candidate_pairs(queries, bound)
    corners = mesh.vertices[mesh.faces]
    centroids = corners.mean(axis=1)
    radii = np.linalg.norm(corners - centroids[:, None, :], axis=2).max(axis=1)
    gaps = np.linalg.norm(queries[:, None, :] - centroids[None, :, :], axis=2)
    limit = (bound + 1e-9 * (1.0 + bound))[:, None]
    selected = np.zeros(gaps.shape, dtype=bool)
    selected[query_ids, face_ids] = True

    assert query_ids.size == np.count_nonzero(selected)
    np.testing.assert_array_equal(selected, gaps - radii[None, :] <= limit)
    assert query_ids.size <= np.count_nonzero(gaps <= limit + radii.max())

    monkeypatch.setattr(surface, "_QUERY_CHUNK", 7)
    chunked = index.query(queries)
    np.testing.assert_array_equal(chunked.distances, fast.distances)
    np.testing.assert_array_equal(chunked.face_indices, fast.face_indices)
