import json
import sys
import types
from pathlib import Path
from typing import Any

import pytest
from mesh_spectra.tracking import (
    JsonlEventLogger,
    WandbSweepLogger,
    _artifact_alias,
    append_jsonl,
)


class _FakeArtifact:
    def __init__(self, *, name: str, type: str) -> None:
        self.name = name
        self.type = type
        self.files: list[str] = []
        self.metadata: dict[str, Any] = {}

    def add_file(self, path: str, name: str | None = None) -> None:
        self.files.append(path)


class _FakeRun:
    def __init__(self) -> None:
        self.url = "https://example.test/run/456"
        self.summary: dict[str, Any] = {}
        self.logged: list[tuple[dict[str, Any], int]] = []
        self.artifacts: list[tuple[_FakeArtifact, list[str]]] = []
        self.finished = False

    def log(self, payload: dict[str, Any], *, step: int) -> None:
        self.logged.append((payload, step))

    def log_artifact(self, artifact: _FakeArtifact, *, aliases: list[str]) -> None:
        self.artifacts.append((artifact, aliases))

    def finish(self) -> None:
        self.finished = True


def test_append_jsonl_writes_compact_sorted_rows(tmp_path: Path) -> None:
    path = tmp_path / "nested" / "rows.jsonl"
    append_jsonl(path, {"b": 1, "a": [1, 2]})
    append_jsonl(path, {"c": None})
    assert path.read_text(encoding="utf-8").splitlines() == ['{"a":[1,2],"b":1}', '{"c":null}']


def test_event_logger_rows(tmp_path: Path) -> None:
    logger = JsonlEventLogger.for_output_dir(tmp_path)
    logger.log_event(
        command="decompose",
        arguments={"inputs": ["hand.obj"]},
        outputs=["spectrum.csv"],
        status="ok",
    )
    rows = [json.loads(line) for line in (tmp_path / "events.jsonl").read_text().splitlines()]
    assert rows == [
        {
            "arguments": {"inputs": ["hand.obj"]},
            "command": "decompose",
            "outputs": ["spectrum.csv"],
            "status": "ok",
            "tool_version": "0.1.0",
        }
    ]


def test_artifact_alias_sanitizes() -> None:
    assert _artifact_alias("noise sweep/seed:3") == "noise-sweep-seed-3"
    assert _artifact_alias("///") == "latest"


def test_sweep_logger_logs_cells_and_csv_artifact(tmp_path: Path) -> None:
    run = _FakeRun()
    logger = WandbSweepLogger(run=run, artifact_ctor=_FakeArtifact)

    logger.log_cell({"band_lo": 60, "mean_msnr": 7.5}, step=3)
    logger.log_cell({}, step=4)

    csv_path = tmp_path / "noise_sweep.csv"
    csv_path.write_text("band_lo\n", encoding="utf-8")
    logger.log_csv_artifact(path=csv_path, run_id="noise-sweep-abc", aliases=["seed-0", "latest"])
    logger.finish({"rows": 80})

    assert logger.run_url == run.url
    assert run.logged == [({"band_lo": 60, "mean_msnr": 7.5}, 3)]
    artifact, aliases = run.artifacts[0]
    assert artifact.name == "noise-sweep-noise-sweep-abc"
    assert artifact.type == "sweep"
    assert artifact.files == [str(csv_path)]
    assert aliases == ["latest", "seed-0"]
    assert run.summary["rows"] == 80
    assert run.finished is True


def test_create_respects_modes(monkeypatch: pytest.MonkeyPatch) -> None:
    assert WandbSweepLogger.create(run_id="r", project="p", config={}, mode="disabled") is None
    with pytest.raises(ValueError, match="unknown wandb mode"):
        WandbSweepLogger.create(run_id="r", project="p", config={}, mode="cloud")

    monkeypatch.setitem(sys.modules, "wandb", None)
    with pytest.raises(RuntimeError, match="not installed"):
        WandbSweepLogger.create(run_id="r", project="p", config={}, mode="offline")


def test_create_initializes_an_offline_run(monkeypatch: pytest.MonkeyPatch) -> None:
    calls: list[dict[str, Any]] = []
    run = _FakeRun()

    def _init(**kwargs: Any) -> _FakeRun:
        calls.append(kwargs)
        return run

    monkeypatch.setitem(
        sys.modules, "wandb", types.SimpleNamespace(init=_init, Artifact=_FakeArtifact)
    )
    logger = WandbSweepLogger.create(
        run_id="noise-sweep-1", project="mesh", config={"seed": 1}, mode="offline", tags=["auto"]
    )

    assert logger is not None
    assert calls == [
        {
            "project": "mesh",
            "name": "noise-sweep-1",
            "config": {"seed": 1},
            "tags": ["auto"],
            "job_type": "noise-sweep",
            "mode": "offline",
        }
    ]
