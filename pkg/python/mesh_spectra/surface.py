"""Closest-point queries against triangle surfaces.

The per-pair kernel follows the Voronoi-region walk from Ericson's "Real-Time Collision
Detection", vectorized over (query, triangle) pairs. `SurfaceIndex` prunes the candidate
triangles with a k-d tree over face centroids: the best of the k nearest centroids gives
an upper bound `u`, and only faces whose bounding ball around the centroid comes within
`u` of the query are evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .mesh_core import TriangleMesh

_SEED_NEIGHBOURS = 8
_LARGE_FACE_QUANTILE = 0.95
_QUERY_CHUNK = 2048
# Upper limit on query x large-face distance entries held at once.
_LARGE_PAIR_BUDGET = 4_000_000


def _dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", x, y)


def closest_points_on_triangles(
    a: np.ndarray, b: np.ndarray, c: np.ndarray, points: np.ndarray
) -> np.ndarray:
    """Closest point of triangle (a[i], b[i], c[i]) to points[i] for every row i."""
    result = np.empty_like(points)
    remain = np.ones(points.shape[0], dtype=bool)

    ab = b - a
    ac = c - a
    ap = points - a
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    is_a = (d1 <= 0.0) & (d2 <= 0.0)
    result[is_a] = a[is_a]
    remain &= ~is_a

    bp = points - b
    d3 = _dot(ab, bp)
    d4 = _dot(ac, bp)
    is_b = remain & (d3 >= 0.0) & (d4 <= d3)
    result[is_b] = b[is_b]
    remain &= ~is_b

    vc = d1 * d4 - d3 * d2
    is_ab = remain & (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    if np.any(is_ab):
        v = (d1[is_ab] / (d1[is_ab] - d3[is_ab]))[:, None]
        result[is_ab] = a[is_ab] + v * ab[is_ab]
    remain &= ~is_ab

    cp = points - c
    d5 = _dot(ab, cp)
    d6 = _dot(ac, cp)
    is_c = remain & (d6 >= 0.0) & (d5 <= d6)
    result[is_c] = c[is_c]
    remain &= ~is_c

    vb = d5 * d2 - d1 * d6
    is_ac = remain & (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    if np.any(is_ac):
        w = (d2[is_ac] / (d2[is_ac] - d6[is_ac]))[:, None]
        result[is_ac] = a[is_ac] + w * ac[is_ac]
    remain &= ~is_ac

    va = d3 * d6 - d5 * d4
    is_bc = remain & (va <= 0.0) & ((d4 - d3) >= 0.0) & ((d5 - d6) >= 0.0)
    if np.any(is_bc):
        d43 = d4[is_bc] - d3[is_bc]
        w = (d43 / (d43 + (d5[is_bc] - d6[is_bc])))[:, None]
        result[is_bc] = b[is_bc] + w * (c[is_bc] - b[is_bc])
    remain &= ~is_bc

    if np.any(remain):
        denom = 1.0 / (va[remain] + vb[remain] + vc[remain])
        v = (vb[remain] * denom)[:, None]
        w = (vc[remain] * denom)[:, None]
        result[remain] = a[remain] + ab[remain] * v + ac[remain] * w
    return result


@dataclass(frozen=True, eq=False)
class SurfaceQuery:
    points: np.ndarray
    distances: np.ndarray
    face_indices: np.ndarray


def _select_nearest(
    query_ids: np.ndarray, face_ids: np.ndarray, closest: np.ndarray, points: np.ndarray
) -> SurfaceQuery:
    distances = np.linalg.norm(closest - points[query_ids], axis=1)
    # Per query: smallest distance first, then lowest face index.
    order = np.lexsort((face_ids, distances, query_ids))
    _, first = np.unique(query_ids[order], return_index=True)
    chosen = order[first]
    return SurfaceQuery(
        points=closest[chosen],
        distances=distances[chosen],
        face_indices=face_ids[chosen].astype(np.int64),
    )


class SurfaceIndex:
    """Immutable acceleration structure over the faces of one mesh.

    Each face f lies inside the ball of radius r[f] around its centroid, so
    |q - centroid[f]| - r[f] is a lower bound on its distance to q. Faces whose radius is
    at most the `_LARGE_FACE_QUANTILE` quantile R go into a k-d tree queried at
    `bound + R`; the few larger faces are tested against their own radius directly.
    """

    def __init__(self, mesh: TriangleMesh) -> None:
        if mesh.face_count == 0:
            raise ValueError("surface queries need a mesh with at least one face")
        self.mesh = mesh
        corners = mesh.vertices[mesh.faces]
        self._a = np.ascontiguousarray(corners[:, 0])
        self._b = np.ascontiguousarray(corners[:, 1])
        self._c = np.ascontiguousarray(corners[:, 2])
        centroids = corners.mean(axis=1)
        self._centroids = centroids
        self._radii = np.linalg.norm(corners - centroids[:, None, :], axis=2).max(axis=1)
        self._tree = cKDTree(centroids)

        self._small_radius = float(np.quantile(self._radii, _LARGE_FACE_QUANTILE))
        large = self._radii > self._small_radius
        self._small_faces = np.flatnonzero(~large)
        self._large_faces = np.flatnonzero(large)
        self._small_tree = cKDTree(centroids[self._small_faces]) if self._small_faces.size else None

    @property
    def face_count(self) -> int:
        return self.mesh.face_count

    def _evaluate(
        self, query_ids: np.ndarray, face_ids: np.ndarray, points: np.ndarray
    ) -> SurfaceQuery:
        closest = closest_points_on_triangles(
            self._a[face_ids], self._b[face_ids], self._c[face_ids], points[query_ids]
        )
        return _select_nearest(query_ids, face_ids, closest, points)

    def query_exhaustive(self, points: np.ndarray) -> SurfaceQuery:
        """Every query against every face."""
        values = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        count = values.shape[0]
        query_ids = np.repeat(np.arange(count), self.face_count)
        face_ids = np.tile(np.arange(self.face_count), count)
        return self._evaluate(query_ids, face_ids, values)

    def candidate_pairs(
        self, points: np.ndarray, bound: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """(query, face) pairs whose radius lower bound does not exceed `bound`."""
        count = points.shape[0]
        limit = bound + 1.0e-9 * (1.0 + bound)
        query_parts: list[np.ndarray] = []
        face_parts: list[np.ndarray] = []

        if self._small_tree is not None:
            rows = self._small_tree.query_ball_point(points, r=limit + self._small_radius)
            query_ids = np.repeat(np.arange(count), [len(row) for row in rows])
            local = np.fromiter(
                (face for row in rows for face in row), dtype=np.int64, count=query_ids.size
            )
            face_ids = self._small_faces[local]
            gap = np.linalg.norm(points[query_ids] - self._centroids[face_ids], axis=1)
            keep = gap - self._radii[face_ids] <= limit[query_ids]
            query_parts.append(query_ids[keep])
            face_parts.append(face_ids[keep])

        if self._large_faces.size:
            gap = np.linalg.norm(
                points[:, None, :] - self._centroids[self._large_faces][None, :, :], axis=2
            )
            rows, cols = np.nonzero(gap - self._radii[self._large_faces] <= limit[:, None])
            query_parts.append(rows.astype(np.int64))
            face_parts.append(self._large_faces[cols])

        return np.concatenate(query_parts), np.concatenate(face_parts)

    def _query_chunk(self, values: np.ndarray) -> SurfaceQuery:
        count = values.shape[0]
        seeds = min(_SEED_NEIGHBOURS, self.face_count)
        _, nearest = self._tree.query(values, k=seeds)
        nearest = np.asarray(nearest, dtype=np.int64).reshape(count, seeds)
        seed_query = np.repeat(np.arange(count), seeds)
        bound = self._evaluate(seed_query, nearest.reshape(-1), values).distances
        query_ids, face_ids = self.candidate_pairs(values, bound)
        return self._evaluate(query_ids, face_ids, values)

    def query(self, points: np.ndarray) -> SurfaceQuery:
        values = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        count = values.shape[0]
        if count == 0:
            return SurfaceQuery(
                points=np.empty((0, 3)),
                distances=np.empty(0),
                face_indices=np.empty(0, dtype=np.int64),
            )

        chunk = max(1, min(_QUERY_CHUNK, _LARGE_PAIR_BUDGET // max(1, self._large_faces.size)))
        parts = [
            self._query_chunk(values[start : start + chunk]) for start in range(0, count, chunk)
        ]
        return SurfaceQuery(
            points=np.concatenate([part.points for part in parts]),
            distances=np.concatenate([part.distances for part in parts]),
            face_indices=np.concatenate([part.face_indices for part in parts]),
        )


def closest_point_on_surface(
    point: np.ndarray, index: SurfaceIndex
) -> tuple[np.ndarray, float, int]:
    result = index.query(np.asarray(point, dtype=np.float64).reshape(1, 3))
    return result.points[0], float(result.distances[0]), int(result.face_indices[0])


def snap_to_surface(template: TriangleMesh, target: TriangleMesh) -> TriangleMesh:
    """Replace every template vertex by its closest point on the target surface."""
    result = SurfaceIndex(target).query(template.vertices)
    return template.with_vertices(result.points)
