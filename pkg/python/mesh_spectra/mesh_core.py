"""Triangle mesh data model, adjacency extraction and topological validation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import MeshStructureError

# Local edge k of face (a, b, c) runs between corners _EDGE_CORNERS[k]; its opposite
# corner is (k + 2) % 3.
_EDGE_CORNERS = ((0, 1), (1, 2), (2, 0))


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _as_vertex_array(raw: Any) -> np.ndarray:
    vertices = np.array(raw, dtype=np.float64, copy=True)
    if vertices.size == 0:
        return vertices.reshape(0, 3)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise ValueError(f"vertices must have shape (N, 3), got {vertices.shape}")
    if not np.all(np.isfinite(vertices)):
        raise ValueError("vertices must be finite")
    return vertices


def _as_face_array(raw: Any) -> np.ndarray:
    faces = np.array(raw, dtype=np.int64, copy=True)
    if faces.size == 0:
        return faces.reshape(0, 3)
    if faces.ndim != 2 or faces.shape[1] != 3:
        raise ValueError(f"faces must have shape (F, 3), got {faces.shape}")
    return faces


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Vertices in millimetres plus 0-based triangle indices. Arrays are read-only."""

    vertices: np.ndarray
    faces: np.ndarray = field(default_factory=lambda: np.empty((0, 3), dtype=np.int64))

    def __post_init__(self) -> None:
        vertices = _as_vertex_array(self.vertices)
        faces = _as_face_array(self.faces)

        if faces.shape[0] > 0:
            bad = (faces < 0) | (faces >= vertices.shape[0])
            if np.any(bad):
                face_index = int(np.flatnonzero(bad.any(axis=1))[0])
                raise MeshStructureError(
                    f"face {face_index} references vertex outside [0, {vertices.shape[0]}): "
                    f"{faces[face_index].tolist()}"
                )
            repeated = (
                (faces[:, 0] == faces[:, 1])
                | (faces[:, 1] == faces[:, 2])
                | (faces[:, 2] == faces[:, 0])
            )
            if np.any(repeated):
                face_index = int(np.flatnonzero(repeated)[0])
                raise MeshStructureError(
                    f"face {face_index} repeats a vertex: {faces[face_index].tolist()}"
                )

        object.__setattr__(self, "vertices", _frozen(vertices))
        object.__setattr__(self, "faces", _frozen(faces))

    @property
    def vertex_count(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def face_count(self) -> int:
        return int(self.faces.shape[0])

    def with_vertices(self, vertices: np.ndarray) -> TriangleMesh:
        """Same connectivity, new positions."""
        return TriangleMesh(vertices=vertices, faces=self.faces)

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
        digest.update(b"|")
        digest.update(np.ascontiguousarray(self.faces, dtype="<i8").tobytes())
        return digest.hexdigest()


@dataclass(frozen=True, eq=False)
class MeshGraph:
    """Undirected vertex graph; `edges` rows are unique pairs (i, j) with i < j."""

    vertex_count: int
    edges: np.ndarray

    def __post_init__(self) -> None:
        edges = np.array(self.edges, dtype=np.int64, copy=True).reshape(-1, 2)
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("graph edges must join distinct vertices")
        if edges.size and (edges.min() < 0 or edges.max() >= int(self.vertex_count)):
            raise ValueError("graph edge index out of range")
        edges = np.sort(edges, axis=1)
        edges = np.unique(edges, axis=0) if edges.shape[0] else edges
        object.__setattr__(self, "vertex_count", int(self.vertex_count))
        object.__setattr__(self, "edges", _frozen(edges))

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency in canonical CSR form."""
        n = self.vertex_count
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        cols = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        data = np.ones(rows.shape[0], dtype=np.float64)
        adjacency = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        adjacency.sum_duplicates()
        adjacency.sort_indices()
        return adjacency

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.reshape(-1), minlength=self.vertex_count).astype(np.int64)


@dataclass(frozen=True)
class ValidationReport:
    vertex_count: int
    edge_count: int
    face_count: int
    euler_characteristic: int
    boundary_edge_count: int
    non_manifold_edge_count: int
    connected_component_count: int
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "euler_characteristic": self.euler_characteristic,
            "boundary_edge_count": self.boundary_edge_count,
            "non_manifold_edge_count": self.non_manifold_edge_count,
            "connected_component_count": self.connected_component_count,
            "vertex_count": self.vertex_count,
            "edge_count": self.edge_count,
            "face_count": self.face_count,
            "warnings": list(self.warnings),
        }


def edge_table(faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique sorted edges and, per face, the row of each of its three local edges.

    Edges come out in lexicographic order of (min index, max index), independent of the
    face order.
    """
    faces = _as_face_array(faces)
    if faces.shape[0] == 0:
        return np.empty((0, 2), dtype=np.int64), np.empty((0, 3), dtype=np.int64)

    half_edges = np.stack([faces[:, list(corners)] for corners in _EDGE_CORNERS], axis=1)
    pairs = np.sort(half_edges.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    return edges.astype(np.int64), inverse.reshape(-1, 3).astype(np.int64)


def refine_faces(faces: np.ndarray, face_edges: np.ndarray, vertex_count: int) -> np.ndarray:
    """1-to-4 split; edge e becomes vertex `vertex_count + e`. Orientation is preserved."""
    faces = _as_face_array(faces)
    if faces.shape[0] == 0:
        return np.empty((0, 3), dtype=np.int64)
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    ab = vertex_count + face_edges[:, 0]
    bc = vertex_count + face_edges[:, 1]
    ca = vertex_count + face_edges[:, 2]
    refined = np.stack(
        [
            np.stack([a, ab, ca], axis=1),
            np.stack([b, bc, ab], axis=1),
            np.stack([c, ca, bc], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ],
        axis=1,
    )
    return refined.reshape(-1, 3).astype(np.int64)


def edge_face_counts(faces: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Edge table plus the number of faces incident to each edge."""
    edges, face_edges = edge_table(faces)
    counts = np.bincount(face_edges.reshape(-1), minlength=edges.shape[0]).astype(np.int64)
    return edges, face_edges, counts


def build_graph(mesh: TriangleMesh) -> MeshGraph:
    edges, _ = edge_table(mesh.faces)
    return MeshGraph(vertex_count=mesh.vertex_count, edges=edges)


def validate(mesh: TriangleMesh) -> ValidationReport:
    edges, _, counts = edge_face_counts(mesh.faces)

    vertex_count = mesh.vertex_count
    edge_count = int(edges.shape[0])
    face_count = mesh.face_count
    boundary = int(np.count_nonzero(counts == 1))
    non_manifold = int(np.count_nonzero(counts > 2))

    if vertex_count == 0:
        components = 0
    else:
        graph = MeshGraph(vertex_count=vertex_count, edges=edges)
        components, _ = connected_components(graph.adjacency(), directed=False)

    warnings: list[str] = []
    if non_manifold:
        warnings.append(
            f"{non_manifold} non-manifold edge(s) with more than two incident faces; "
            "spectral operations still apply, subdivision will refuse this mesh"
        )
    referenced = np.unique(mesh.faces.reshape(-1)).shape[0]
    if face_count and referenced < vertex_count:
        warnings.append(f"{vertex_count - referenced} vertex/vertices not used by any face")

    return ValidationReport(
        vertex_count=vertex_count,
        edge_count=edge_count,
        face_count=face_count,
        euler_characteristic=vertex_count - edge_count + face_count,
        boundary_edge_count=boundary,
        non_manifold_edge_count=non_manifold,
        connected_component_count=int(components),
        warnings=tuple(warnings),
    )
