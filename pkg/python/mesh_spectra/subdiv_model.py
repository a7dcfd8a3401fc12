"""Loop subdivision as a sparse linear map, parameter transfer, and a skinned hand model.

The operator maps n coarse vertex rows to n + m refined rows (m = coarse edge count):
row i < n is the smoothed original vertex, row n + e is the new vertex on edge e of the
sorted edge table. The same matrix upsamples vertex positions, skinning weights and
blendshape fields.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial.transform import Rotation

from .errors import MeshStructureError
from .mesh_core import TriangleMesh, edge_face_counts, refine_faces

ROTATION_TOLERANCE = 1.0e-9
WEIGHT_SUM_TOLERANCE = 1.0e-9


def loop_beta(valence: np.ndarray | int) -> np.ndarray:
    """Neighbour weight of an interior even vertex with the given valence."""
    k = np.asarray(valence, dtype=np.float64)
    return (1.0 / k) * (5.0 / 8.0 - (3.0 / 8.0 + 0.25 * np.cos(2.0 * np.pi / k)) ** 2)


@dataclass(frozen=True, eq=False)
class SubdivisionOperator:
    matrix: sp.csr_matrix
    coarse_faces: np.ndarray
    refined_faces: np.ndarray

    @property
    def input_size(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def output_size(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def coarse_face_count(self) -> int:
        return int(self.coarse_faces.shape[0])

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).reshape(-1)


def build_subdivision_operator(mesh: TriangleMesh) -> SubdivisionOperator:
    n = mesh.vertex_count
    faces = mesh.faces
    edges, face_edges, counts = edge_face_counts(faces)
    m = int(edges.shape[0])

    if np.any(counts > 2):
        bad = edges[int(np.flatnonzero(counts > 2)[0])]
        raise MeshStructureError(
            f"edge ({int(bad[0])}, {int(bad[1])}) has more than two incident faces; "
            "Loop subdivision needs a manifold mesh"
        )

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    def _add(r: np.ndarray, c: np.ndarray, v: np.ndarray | float) -> None:
        r = np.asarray(r, dtype=np.int64)
        rows.append(r)
        cols.append(np.asarray(c, dtype=np.int64))
        vals.append(np.broadcast_to(np.asarray(v, dtype=np.float64), r.shape).copy())

    # Odd (edge) vertices.
    interior_edge = counts == 2
    boundary_edge = counts == 1
    edge_ids = np.arange(m, dtype=np.int64)
    endpoint_weight = np.where(interior_edge, 3.0 / 8.0, 0.5)
    for side in (0, 1):
        _add(n + edge_ids, edges[:, side], endpoint_weight)

    # Corner opposite local edge k is corner (k + 2) % 3.
    opposite = faces[:, [2, 0, 1]].reshape(-1)
    incident_edge = face_edges.reshape(-1)
    wing = interior_edge[incident_edge]
    _add(n + incident_edge[wing], opposite[wing], 1.0 / 8.0)

    # Even (original) vertices.
    all_pairs = np.concatenate([edges, edges[:, ::-1]], axis=0)
    valence = np.bincount(all_pairs[:, 0], minlength=n)
    boundary_pairs = np.concatenate([edges[boundary_edge], edges[boundary_edge][:, ::-1]], axis=0)
    boundary_valence = np.bincount(boundary_pairs[:, 0], minlength=n)

    vertex_ids = np.arange(n, dtype=np.int64)
    crease = boundary_valence == 2
    interior = (boundary_valence == 0) & (valence > 0)

    safe_valence = np.where(interior, valence, 1)
    beta = np.where(interior, loop_beta(safe_valence), 0.0)
    # Isolated vertices and boundary vertices without exactly two boundary edges stay put.
    self_weight = np.ones(n, dtype=np.float64)
    self_weight[interior] = 1.0 - valence[interior] * beta[interior]
    self_weight[crease] = 3.0 / 4.0
    _add(vertex_ids, vertex_ids, self_weight)

    interior_pairs = all_pairs[interior[all_pairs[:, 0]]]
    _add(interior_pairs[:, 0], interior_pairs[:, 1], beta[interior_pairs[:, 0]])
    crease_pairs = boundary_pairs[crease[boundary_pairs[:, 0]]]
    _add(crease_pairs[:, 0], crease_pairs[:, 1], 1.0 / 8.0)

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n + m, n),
    ).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()

    return SubdivisionOperator(
        matrix=matrix,
        coarse_faces=np.array(faces, copy=True),
        refined_faces=refine_faces(faces, face_edges, n),
    )


def _check_input_rows(op: SubdivisionOperator, rows: int, what: str) -> None:
    if rows != op.input_size:
        raise ValueError(f"{what} has {rows} vertices, operator expects {op.input_size}")


def apply_subdivision(op: SubdivisionOperator, mesh: TriangleMesh) -> TriangleMesh:
    _check_input_rows(op, mesh.vertex_count, "mesh")
    if not np.array_equal(mesh.faces, op.coarse_faces):
        raise ValueError("mesh connectivity differs from the mesh the operator was built for")
    return TriangleMesh(vertices=op.matrix @ mesh.vertices, faces=op.refined_faces)


def upsample_signal(op: SubdivisionOperator, signal: np.ndarray) -> np.ndarray:
    values = np.asarray(signal, dtype=np.float64)
    _check_input_rows(op, int(values.shape[0]), "signal")
    return np.asarray(op.matrix @ values)


def transfer_parameters(op: SubdivisionOperator, params: np.ndarray) -> np.ndarray:
    """(L_s params^T)^T for an x-by-N parameter matrix."""
    values = np.asarray(params, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"params must be a 2-D x-by-N matrix, got shape {values.shape}")
    _check_input_rows(op, int(values.shape[1]), "params")
    return np.asarray(op.matrix @ values.T).T


def _transfer_fields(op: SubdivisionOperator, fields: np.ndarray) -> np.ndarray:
    """Upsample a stack of N x 3 fields shaped (S, N, 3)."""
    count, rows, _ = fields.shape
    if count == 0:
        return np.zeros((0, op.output_size, 3), dtype=np.float64)
    stacked = fields.transpose(1, 0, 2).reshape(rows, count * 3)
    refined = upsample_signal(op, stacked)
    return refined.reshape(op.output_size, count, 3).transpose(1, 0, 2).copy()


def subdivide_mesh(mesh: TriangleMesh, levels: int) -> TriangleMesh:
    if int(levels) < 0:
        raise ValueError("levels must be non-negative")
    current = mesh
    for _ in range(int(levels)):
        current = apply_subdivision(build_subdivision_operator(current), current)
    return current


def _field_stack(raw: np.ndarray | Sequence[np.ndarray], rows: int, name: str) -> np.ndarray:
    fields = np.array(raw, dtype=np.float64, copy=True)
    if fields.size == 0:
        return np.zeros((0, rows, 3), dtype=np.float64)
    if fields.ndim != 3 or fields.shape[1:] != (rows, 3):
        raise ValueError(f"{name} fields must have shape (count, {rows}, 3), got {fields.shape}")
    return fields


@dataclass(frozen=True, eq=False)
class HandModel:
    """Rest template with skinning weights (J x N), blendshape stacks and a residual field."""

    template: TriangleMesh
    skinning_weights: np.ndarray
    shape_basis: np.ndarray
    pose_basis: np.ndarray
    residual: np.ndarray
    joint_rest_positions: np.ndarray
    joint_parents: tuple[int | None, ...]

    def __post_init__(self) -> None:
        n = self.template.vertex_count
        weights = np.array(self.skinning_weights, dtype=np.float64, copy=True)
        joints = np.array(self.joint_rest_positions, dtype=np.float64, copy=True).reshape(-1, 3)
        joint_count = int(joints.shape[0])
        if joint_count == 0:
            raise ValueError("a hand model needs at least one joint")
        if weights.shape != (joint_count, n):
            raise ValueError(
                f"skinning_weights must have shape ({joint_count}, {n}), got {weights.shape}"
            )
        if np.any(weights < -WEIGHT_SUM_TOLERANCE):
            raise ValueError("skinning weights must be non-negative")
        column_error = np.abs(weights.sum(axis=0) - 1.0)
        if n and float(column_error.max()) > WEIGHT_SUM_TOLERANCE:
            vertex = int(np.argmax(column_error))
            raise ValueError(f"skinning weights of vertex {vertex} do not sum to 1")

        residual = np.array(self.residual, dtype=np.float64, copy=True)
        if residual.shape != (n, 3):
            raise ValueError(f"residual must have shape ({n}, 3), got {residual.shape}")

        parents = tuple(None if p is None else int(p) for p in self.joint_parents)
        if len(parents) != joint_count:
            raise ValueError(f"expected {joint_count} joint parents, got {len(parents)}")
        for child, parent in enumerate(parents):
            if parent is not None and not 0 <= parent < child:
                raise ValueError(
                    f"joint {child} has parent {parent}; parents must precede their children"
                )

        object.__setattr__(self, "skinning_weights", weights)
        object.__setattr__(self, "shape_basis", _field_stack(self.shape_basis, n, "shape_basis"))
        object.__setattr__(self, "pose_basis", _field_stack(self.pose_basis, n, "pose_basis"))
        object.__setattr__(self, "residual", residual)
        object.__setattr__(self, "joint_rest_positions", joints)
        object.__setattr__(self, "joint_parents", parents)

    @property
    def joint_count(self) -> int:
        return int(self.joint_rest_positions.shape[0])

    @property
    def vertex_count(self) -> int:
        return self.template.vertex_count

    @property
    def shape_count(self) -> int:
        return int(self.shape_basis.shape[0])

    @property
    def pose_count(self) -> int:
        return int(self.pose_basis.shape[0])


@dataclass(frozen=True, eq=False)
class Pose:
    rotations: np.ndarray
    root_translation: np.ndarray
    shape_coeffs: np.ndarray
    pose_coeffs: np.ndarray

    def __post_init__(self) -> None:
        rotations = np.array(self.rotations, dtype=np.float64, copy=True).reshape(-1, 3, 3)
        gram = np.einsum("jab,jac->jbc", rotations, rotations)
        if rotations.shape[0] and float(np.abs(gram - np.eye(3)).max()) > ROTATION_TOLERANCE:
            raise ValueError("joint rotations must be orthonormal")
        if rotations.shape[0] and float(np.abs(np.linalg.det(rotations) - 1.0).max()) > (
            ROTATION_TOLERANCE
        ):
            raise ValueError("joint rotations must have determinant +1")
        translation = np.array(self.root_translation, dtype=np.float64, copy=True).reshape(3)
        object.__setattr__(self, "rotations", rotations)
        object.__setattr__(self, "root_translation", translation)
        object.__setattr__(
            self, "shape_coeffs", np.array(self.shape_coeffs, dtype=np.float64).reshape(-1)
        )
        object.__setattr__(
            self, "pose_coeffs", np.array(self.pose_coeffs, dtype=np.float64).reshape(-1)
        )

    @classmethod
    def identity(cls, joint_count: int, shape_count: int = 0, pose_count: int = 0) -> Pose:
        return cls(
            rotations=np.broadcast_to(np.eye(3), (int(joint_count), 3, 3)),
            root_translation=np.zeros(3),
            shape_coeffs=np.zeros(int(shape_count)),
            pose_coeffs=np.zeros(int(pose_count)),
        )

    @classmethod
    def from_axis_angles(
        cls,
        axis_angles: np.ndarray,
        root_translation: Sequence[float] = (0.0, 0.0, 0.0),
        shape_coeffs: Sequence[float] = (),
        pose_coeffs: Sequence[float] = (),
    ) -> Pose:
        """Rotation vectors (radians, J x 3), one per joint."""
        vectors = np.asarray(axis_angles, dtype=np.float64).reshape(-1, 3)
        return cls(
            rotations=Rotation.from_rotvec(vectors).as_matrix().reshape(-1, 3, 3),
            root_translation=np.asarray(root_translation, dtype=np.float64),
            shape_coeffs=np.asarray(shape_coeffs, dtype=np.float64),
            pose_coeffs=np.asarray(pose_coeffs, dtype=np.float64),
        )


def joint_transforms(model: HandModel, pose: Pose) -> tuple[np.ndarray, np.ndarray]:
    """Rest-space skinning transforms (R_j, t_j) so that a bound point maps to R_j p + t_j.

    Joint j rotates its subtree about its own rest position, composed with its parent.
    """
    joints = model.joint_rest_positions
    rotations = np.empty((model.joint_count, 3, 3), dtype=np.float64)
    translations = np.empty((model.joint_count, 3), dtype=np.float64)
    for j, parent in enumerate(model.joint_parents):
        local_rotation = pose.rotations[j]
        local_translation = joints[j] - local_rotation @ joints[j]
        if parent is None:
            rotations[j] = local_rotation
            translations[j] = local_translation
        else:
            rotations[j] = rotations[parent] @ local_rotation
            translations[j] = rotations[parent] @ local_translation + translations[parent]
    return rotations, translations


def rest_vertices(model: HandModel, pose: Pose) -> np.ndarray:
    """Template plus blendshapes plus residual, before skinning."""
    return (
        model.template.vertices
        + np.tensordot(pose.shape_coeffs, model.shape_basis, axes=1)
        + np.tensordot(pose.pose_coeffs, model.pose_basis, axes=1)
        + model.residual
    )


def pose_model(model: HandModel, pose: Pose) -> TriangleMesh:
    if pose.rotations.shape[0] != model.joint_count:
        raise ValueError(
            f"pose has {pose.rotations.shape[0]} rotations, model has {model.joint_count} joints"
        )
    if pose.shape_coeffs.shape[0] != model.shape_count:
        raise ValueError(
            f"pose has {pose.shape_coeffs.shape[0]} shape coefficients, "
            f"model has {model.shape_count} shape fields"
        )
    if pose.pose_coeffs.shape[0] != model.pose_count:
        raise ValueError(
            f"pose has {pose.pose_coeffs.shape[0]} pose coefficients, "
            f"model has {model.pose_count} pose fields"
        )

    vertices = rest_vertices(model, pose)
    rotations, translations = joint_transforms(model, pose)
    # Blending displacements keeps the identity pose exact.
    blended = np.einsum("jn,jab->nab", model.skinning_weights, rotations - np.eye(3))
    displacement = np.einsum("nab,nb->na", blended, vertices)
    displacement += model.skinning_weights.T @ translations
    posed = vertices + displacement + pose.root_translation
    return model.template.with_vertices(posed)


def subdivide_model(model: HandModel, levels: int) -> HandModel:
    if int(levels) < 1:
        raise ValueError("levels must be at least 1")
    current = model
    for _ in range(int(levels)):
        op = build_subdivision_operator(current.template)
        current = HandModel(
            template=apply_subdivision(op, current.template),
            skinning_weights=transfer_parameters(op, current.skinning_weights),
            shape_basis=_transfer_fields(op, current.shape_basis),
            pose_basis=_transfer_fields(op, current.pose_basis),
            residual=np.zeros((op.output_size, 3), dtype=np.float64),
            joint_rest_positions=current.joint_rest_positions,
            joint_parents=current.joint_parents,
        )
    return current
