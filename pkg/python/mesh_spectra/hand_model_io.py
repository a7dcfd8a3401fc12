"""JSON container for HandModel parameters.

Layout::

    {
      "schema_version": 1,
      "template_obj": "<OBJ text>" | "relative/path.obj",
      "skinning_weights": [[...N...], ...J rows],
      "shape_basis": [[[x, y, z], ...N rows], ...],
      "pose_basis": [[[x, y, z], ...N rows], ...],
      "residual": [[x, y, z], ...N rows],
      "joints": {"positions": [[x, y, z], ...J], "parents": [null, 0, ...]}
    }

`template_obj` is treated as a path relative to the JSON file when it does not contain a
line break; otherwise it is parsed as OBJ text.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .constants import HAND_MODEL_SCHEMA_VERSION
from .obj_io import parse_obj, read_obj_file, write_obj
from .subdiv_model import HandModel


class JointsPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    positions: list[list[float]]
    parents: list[int | None]


class HandModelPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: int = Field(default=HAND_MODEL_SCHEMA_VERSION, ge=1)
    template_obj: str
    skinning_weights: list[list[float]]
    shape_basis: list[list[list[float]]] = Field(default_factory=list)
    pose_basis: list[list[list[float]]] = Field(default_factory=list)
    residual: list[list[float]] | None = None
    joints: JointsPayload


def hand_model_from_payload(payload: HandModelPayload, base_dir: Path | None = None) -> HandModel:
    if payload.schema_version != HAND_MODEL_SCHEMA_VERSION:
        raise ValueError(
            f"hand model schema {payload.schema_version} is not supported "
            f"(expected {HAND_MODEL_SCHEMA_VERSION})"
        )
    source = payload.template_obj
    if "\n" in source:
        template = parse_obj(source)
    else:
        template_path = Path(source)
        if not template_path.is_absolute() and base_dir is not None:
            template_path = base_dir / template_path
        template = read_obj_file(template_path)

    n = template.vertex_count
    residual = (
        np.zeros((n, 3), dtype=np.float64)
        if payload.residual is None
        else np.asarray(payload.residual, dtype=np.float64)
    )
    return HandModel(
        template=template,
        skinning_weights=np.asarray(payload.skinning_weights, dtype=np.float64),
        shape_basis=np.asarray(payload.shape_basis, dtype=np.float64),
        pose_basis=np.asarray(payload.pose_basis, dtype=np.float64),
        residual=residual,
        joint_rest_positions=np.asarray(payload.joints.positions, dtype=np.float64),
        joint_parents=tuple(payload.joints.parents),
    )


def hand_model_to_payload(model: HandModel) -> HandModelPayload:
    return HandModelPayload(
        schema_version=HAND_MODEL_SCHEMA_VERSION,
        template_obj=write_obj(model.template),
        skinning_weights=model.skinning_weights.tolist(),
        shape_basis=model.shape_basis.tolist(),
        pose_basis=model.pose_basis.tolist(),
        residual=model.residual.tolist(),
        joints=JointsPayload(
            positions=model.joint_rest_positions.tolist(),
            parents=list(model.joint_parents),
        ),
    )


def load_hand_model(path: Path) -> HandModel:
    if not path.exists():
        raise FileNotFoundError(f"hand model file not found: {path}")
    payload = HandModelPayload.model_validate_json(path.read_text(encoding="utf-8"))
    return hand_model_from_payload(payload, base_dir=path.parent)


def dump_hand_model(model: HandModel, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = hand_model_to_payload(model).model_dump(mode="json")
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path
