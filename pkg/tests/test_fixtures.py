import numpy as np
import pytest
from mesh_spectra.errors import ResourceLimitError
from mesh_spectra.fixtures import (
    check_disc_counts,
    disc_counts,
    make_disc_fixture,
    make_icosphere,
)
from mesh_spectra.mesh_core import validate


@pytest.mark.parametrize("level, vertices, faces", [(0, 12, 20), (1, 42, 80), (2, 162, 320)])
def test_icosphere_counts(level: int, vertices: int, faces: int) -> None:
    mesh = make_icosphere(level)
    assert (mesh.vertex_count, mesh.face_count) == (vertices, faces)


def test_icosphere_vertices_lie_on_sphere() -> None:
    mesh = make_icosphere(3, radius=12.5)
    np.testing.assert_allclose(np.linalg.norm(mesh.vertices, axis=1), 12.5, atol=1e-9)


def test_icosphere_level_limit() -> None:
    with pytest.raises(ResourceLimitError):
        make_icosphere(6)
    with pytest.raises(ValueError):
        make_icosphere(-1)


def test_icosphere_keeps_coarse_vertex_indices() -> None:
    coarse = make_icosphere(1)
    fine = make_icosphere(2)
    np.testing.assert_array_equal(fine.vertices[: coarse.vertex_count], coarse.vertices)


def test_disc_counts_helper() -> None:
    assert disc_counts(778, 16) == (778, 1538, 16)
    assert disc_counts(3, 3) == (3, 1, 3)
    assert disc_counts(6, 6) == (6, 4, 6)
    assert check_disc_counts(778, 1538, 16) == 2315


def test_hand_scale_disc() -> None:
    mesh = make_disc_fixture(778, 1538, 16)
    report = validate(mesh)
    assert (mesh.vertex_count, mesh.face_count) == (778, 1538)
    assert report.euler_characteristic == 1
    assert report.boundary_edge_count == 16
    assert report.non_manifold_edge_count == 0


def test_single_triangle_and_six_vertex_disc() -> None:
    triangle = make_disc_fixture(3, 1, 3)
    assert triangle.face_count == 1
    assert validate(triangle).boundary_edge_count == 3

    hexagon = make_disc_fixture(6, 4, 6)
    report = validate(hexagon)
    assert (report.vertex_count, report.face_count, report.edge_count) == (6, 4, 9)
    assert report.boundary_edge_count == 6


@pytest.mark.parametrize(
    "counts",
    [(10, 5, 4), (5, 3, 6), (5, 3, 2), (10, 12, 4)],
)
def test_infeasible_disc_counts(counts: tuple[int, int, int]) -> None:
    with pytest.raises(ValueError):
        make_disc_fixture(*counts)


def test_disc_is_deterministic() -> None:
    first = make_disc_fixture(200, 368, 30)
    second = make_disc_fixture(200, 368, 30)
    assert first.content_hash() == second.content_hash()
