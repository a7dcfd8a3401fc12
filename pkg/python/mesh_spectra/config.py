"""Command-line run configuration.

Values resolve in the order flags > `--config` JSON file > model defaults. The file mirrors
the model layout::

    {"global": {"seed": 3, "out": "runs/a"}, "noise_sweep": {"trials": 5}}
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from .constants import (
    DEFAULT_NOISE_AMPLITUDE_COUNT,
    DEFAULT_NOISE_MAX_AMPLITUDE,
    DEFAULT_NOISE_TRIALS,
    DENSE_CEILING,
)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GlobalSection(_Section):
    seed: int = 0
    dense_ceiling: int = Field(default=DENSE_CEILING, ge=1)
    allow_large: bool = False
    loss_log_base: str = "e"
    msnr_log_base: str = "10"
    out: str = "out"
    cache_dir: str | None = None


class DecomposeSection(_Section):
    spectrum: bool = False
    cuts: list[int] = Field(default_factory=list)
    bands: Literal["canonical", "auto"] | None = None


class MetricsSection(_Section):
    chamfer_mode: Literal["vertex", "surface"] = "vertex"
    weights: dict[str, Any] | None = None
    subdivide_pred: int = Field(default=0, ge=0)


class SubdivideSection(_Section):
    levels: int = Field(default=2, ge=1)


class NoiseSweepSection(_Section):
    amplitudes: list[float] | None = None
    max_amplitude: float = Field(default=DEFAULT_NOISE_MAX_AMPLITUDE, ge=0.0)
    amplitude_count: int = Field(default=DEFAULT_NOISE_AMPLITUDE_COUNT, ge=1)
    trials: int = Field(default=DEFAULT_NOISE_TRIALS, ge=1)
    bands: Literal["canonical", "auto"] = "auto"
    domain: Literal["spectral", "spatial"] = "spectral"
    wandb_mode: Literal["disabled", "offline", "online"] = "disabled"
    wandb_project: str = "mesh-spectra"


class GradcheckSection(_Section):
    size: int = Field(default=30, ge=3, le=200)
    step: float = Field(default=1.0e-5, gt=0.0)
    tolerance: float = Field(default=1.0e-5, gt=0.0)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    global_: GlobalSection = Field(default_factory=GlobalSection, alias="global")
    decompose: DecomposeSection = Field(default_factory=DecomposeSection)
    metrics: MetricsSection = Field(default_factory=MetricsSection)
    subdivide: SubdivideSection = Field(default_factory=SubdivideSection)
    noise_sweep: NoiseSweepSection = Field(default_factory=NoiseSweepSection)
    gradcheck: GradcheckSection = Field(default_factory=GradcheckSection)

    def to_dict(self) -> dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)


def _load_config_file(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return payload


def load_run_config(
    path: Path | None = None,
    overrides: Mapping[str, Mapping[str, Any]] | None = None,
) -> RunConfig:
    """Merge flag overrides over the optional config file; `None` overrides are skipped."""
    merged: dict[str, Any] = {} if path is None else _load_config_file(path)
    for section, values in (overrides or {}).items():
        target = merged.setdefault(section, {})
        if not isinstance(target, dict):
            raise ValueError(f"config section {section!r} must be a JSON object")
        for key, value in values.items():
            if value is not None:
                target[key] = value
    return RunConfig.model_validate(merged)
