"""ASCII Wavefront OBJ reading and writing (triangles only, 1-based on disk)."""

from __future__ import annotations

import io
from collections.abc import Iterable
from pathlib import Path
from typing import TextIO

import numpy as np

from .constants import TOOL_VERSION
from .errors import MeshParseError, MeshStructureError
from .mesh_core import TriangleMesh

# Statements that carry no geometry we use.
_IGNORED_KEYWORDS = frozenset(
    {"vt", "vn", "vp", "o", "g", "s", "usemtl", "mtllib", "l", "p", "cstype", "deg"}
)


def _resolve_index(token: str, *, vertex_count: int, line_number: int) -> int:
    head = token.split("/", 1)[0]
    try:
        raw = int(head)
    except ValueError as exc:
        raise MeshParseError(f"invalid face index {token!r}", line_number=line_number) from exc

    if raw == 0:
        raise MeshParseError("face index 0 is not valid in OBJ", line_number=line_number)
    if raw < 0:
        resolved = vertex_count + raw
        if resolved < 0:
            raise MeshStructureError(
                f"line {line_number}: relative index {raw} precedes the first vertex"
            )
        return resolved
    return raw - 1


def _iter_lines(text: str | TextIO) -> Iterable[str]:
    if isinstance(text, str):
        return io.StringIO(text)
    return text


def parse_obj(text: str | TextIO) -> TriangleMesh:
    """Parse OBJ text; polygons are fan-triangulated from their first corner."""
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    face_lines: list[int] = []

    for line_number, raw_line in enumerate(_iter_lines(text), start=1):
        stripped = raw_line.split("#", 1)[0].strip()
        if stripped == "":
            continue

        keyword, *fields = stripped.split()
        if keyword == "v":
            if len(fields) < 3:
                raise MeshParseError(
                    f"vertex needs 3 coordinates, got {len(fields)}", line_number=line_number
                )
            try:
                x, y, z = (float(value) for value in fields[:3])
            except ValueError as exc:
                raise MeshParseError(
                    f"invalid vertex coordinate in {stripped!r}", line_number=line_number
                ) from exc
            vertices.append((x, y, z))
        elif keyword == "f":
            if len(fields) < 3:
                raise MeshParseError(
                    f"face needs at least 3 indices, got {len(fields)}", line_number=line_number
                )
            corners = [
                _resolve_index(token, vertex_count=len(vertices), line_number=line_number)
                for token in fields
            ]
            if len(set(corners)) != len(corners):
                raise MeshStructureError(f"line {line_number}: face repeats a vertex {corners}")
            for k in range(1, len(corners) - 1):
                faces.append((corners[0], corners[k], corners[k + 1]))
                face_lines.append(line_number)
        elif keyword in _IGNORED_KEYWORDS:
            continue
        else:
            raise MeshParseError(f"unsupported statement {keyword!r}", line_number=line_number)

    vertex_count = len(vertices)
    for face, line_number in zip(faces, face_lines, strict=True):
        if max(face) >= vertex_count:
            raise MeshStructureError(
                f"line {line_number}: face index {max(face) + 1} exceeds vertex count "
                f"{vertex_count}"
            )

    return TriangleMesh(
        vertices=np.asarray(vertices, dtype=np.float64).reshape(-1, 3),
        faces=np.asarray(faces, dtype=np.int64).reshape(-1, 3),
    )


def write_obj(mesh: TriangleMesh) -> str:
    """Serialize with shortest round-trip float text, so parse_obj restores bits exactly."""
    lines = [
        f"# mesh-spectra {TOOL_VERSION} vertices={mesh.vertex_count} faces={mesh.face_count}"
    ]
    for x, y, z in mesh.vertices.tolist():
        lines.append(f"v {x!r} {y!r} {z!r}")
    for a, b, c in (mesh.faces + 1).tolist():
        lines.append(f"f {a} {b} {c}")
    return "\n".join(lines) + "\n"


def read_obj_file(path: Path) -> TriangleMesh:
    with path.open("r", encoding="ascii") as handle:
        return parse_obj(handle)


def write_obj_file(path: Path, mesh: TriangleMesh) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(write_obj(mesh), encoding="ascii")
