"""Deterministic test meshes: icospheres and disc-topology stand-ins for a hand template."""

from __future__ import annotations

import numpy as np

from .constants import MAX_ICOSPHERE_LEVEL
from .errors import ResourceLimitError
from .mesh_core import TriangleMesh, edge_table, refine_faces

_GOLDEN = (1.0 + 5.0**0.5) / 2.0

_ICOSAHEDRON_VERTICES = (
    (-1.0, _GOLDEN, 0.0),
    (1.0, _GOLDEN, 0.0),
    (-1.0, -_GOLDEN, 0.0),
    (1.0, -_GOLDEN, 0.0),
    (0.0, -1.0, _GOLDEN),
    (0.0, 1.0, _GOLDEN),
    (0.0, -1.0, -_GOLDEN),
    (0.0, 1.0, -_GOLDEN),
    (_GOLDEN, 0.0, -1.0),
    (_GOLDEN, 0.0, 1.0),
    (-_GOLDEN, 0.0, -1.0),
    (-_GOLDEN, 0.0, 1.0),
)

_ICOSAHEDRON_FACES = (
    (0, 11, 5),
    (0, 5, 1),
    (0, 1, 7),
    (0, 7, 10),
    (0, 10, 11),
    (1, 5, 9),
    (5, 11, 4),
    (11, 10, 2),
    (10, 7, 6),
    (7, 1, 8),
    (3, 9, 4),
    (3, 4, 2),
    (3, 2, 6),
    (3, 6, 8),
    (3, 8, 9),
    (4, 9, 5),
    (2, 4, 11),
    (6, 2, 10),
    (8, 6, 7),
    (9, 8, 1),
)


def _project(vertices: np.ndarray, radius: float) -> np.ndarray:
    norms = np.linalg.norm(vertices, axis=1, keepdims=True)
    return vertices * (float(radius) / norms)


def make_icosphere(subdivision_level: int, radius: float = 1.0) -> TriangleMesh:
    """Icosahedron refined by midpoint splits, every vertex projected onto the sphere.

    Vertices of level k keep their indices at level k + 1.
    """
    level = int(subdivision_level)
    if level < 0:
        raise ValueError("subdivision_level must be non-negative")
    if level > MAX_ICOSPHERE_LEVEL:
        raise ResourceLimitError(
            f"icosphere level {level} exceeds the supported maximum {MAX_ICOSPHERE_LEVEL} "
            f"({10 * 4**level + 2} vertices)"
        )
    if not radius > 0.0:
        raise ValueError("radius must be positive")

    vertices = _project(np.asarray(_ICOSAHEDRON_VERTICES, dtype=np.float64), radius)
    faces = np.asarray(_ICOSAHEDRON_FACES, dtype=np.int64)

    for _ in range(level):
        edges, face_edges = edge_table(faces)
        midpoints = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
        faces = refine_faces(faces, face_edges, vertices.shape[0])
        vertices = np.vstack([vertices, _project(midpoints, radius)])

    return TriangleMesh(vertices=vertices, faces=faces)


def disc_counts(vertex_count: int, boundary_count: int) -> tuple[int, int, int]:
    """(V, F, B) of a disc triangulation with the given vertex and boundary counts."""
    v = int(vertex_count)
    b = int(boundary_count)
    return v, 2 * (v - b) + b - 2, b


def check_disc_counts(vertex_count: int, face_count: int, boundary_count: int) -> int:
    """Validate disc feasibility and return the implied edge count."""
    v, f, b = int(vertex_count), int(face_count), int(boundary_count)
    if b < 3:
        raise ValueError(f"a disc needs at least 3 boundary edges, got {b}")
    if b > v:
        raise ValueError(f"boundary count {b} exceeds vertex count {v}")
    if (3 * f + b) % 2 != 0:
        raise ValueError(f"3F + B must be even for a triangulation (F={f}, B={b})")
    e = (3 * f + b) // 2
    if v - e + f != 1:
        raise ValueError(
            f"counts V={v}, F={f}, B={b} give Euler characteristic {v - e + f}, a disc needs 1"
        )
    return e


def make_disc_fixture(
    target_vertices: int,
    target_faces: int,
    target_boundary: int,
    *,
    radius: float = 50.0,
    dome_height: float = 15.0,
) -> TriangleMesh:
    """Disc triangulation with exactly the requested vertex, face and boundary-edge counts.

    The boundary polygon is fanned from its first vertex; interior vertices are then
    inserted one at a time at the centroid of the current largest triangle (ties go to
    the lowest face index). The planar result is lifted onto a dome so that coordinates
    carry a smooth, decaying spectrum.
    """
    check_disc_counts(target_vertices, target_faces, target_boundary)
    boundary = int(target_boundary)
    interior = int(target_vertices) - boundary

    angles = 2.0 * np.pi * np.arange(boundary, dtype=np.float64) / boundary
    points = np.zeros((int(target_vertices), 2), dtype=np.float64)
    points[:boundary, 0] = radius * np.cos(angles)
    points[:boundary, 1] = radius * np.sin(angles)

    faces = np.zeros((int(target_faces), 3), dtype=np.int64)
    areas = np.zeros(int(target_faces), dtype=np.float64)
    face_count = 0
    for k in range(1, boundary - 1):
        faces[face_count] = (0, k, k + 1)
        face_count += 1

    def _area(tri: np.ndarray) -> float:
        p, q, r = points[tri[0]], points[tri[1]], points[tri[2]]
        return 0.5 * abs((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))

    for t in range(face_count):
        areas[t] = _area(faces[t])

    for step in range(interior):
        target = int(np.argmax(areas[:face_count]))
        a, b, c = (int(index) for index in faces[target])
        new_index = boundary + step
        points[new_index] = (points[a] + points[b] + points[c]) / 3.0

        faces[target] = (a, b, new_index)
        faces[face_count] = (b, c, new_index)
        faces[face_count + 1] = (c, a, new_index)
        for t in (target, face_count, face_count + 1):
            areas[t] = _area(faces[t])
        face_count += 2

    r2 = (points[:, 0] ** 2 + points[:, 1] ** 2) / (radius * radius)
    z = dome_height * (1.0 - r2)
    vertices = np.column_stack([points, z])
    return TriangleMesh(vertices=vertices, faces=faces[:face_count])
