import json
from pathlib import Path

import pytest
from mesh_spectra.config import RunConfig, load_run_config
from pydantic import ValidationError


def test_defaults() -> None:
    config = load_run_config()
    assert config.global_.seed == 0
    assert config.global_.dense_ceiling == 4096
    assert config.global_.msnr_log_base == "10"
    assert config.noise_sweep.trials == 20
    assert config.noise_sweep.amplitude_count == 10
    assert config.gradcheck.tolerance == 1e-5
    assert config.metrics.chamfer_mode == "vertex"
    assert config.subdivide.levels == 2


def test_file_values_and_flag_overrides(tmp_path: Path) -> None:
    path = tmp_path / "run.json"
    path.write_text(
        json.dumps({"global": {"seed": 3, "out": "runs/a"}, "noise_sweep": {"trials": 5}}),
        encoding="utf-8",
    )
    config = load_run_config(
        path,
        {"global": {"seed": 9, "out": None}, "noise_sweep": {"trials": None, "domain": "spatial"}},
    )
    assert config.global_.seed == 9
    assert config.global_.out == "runs/a"
    assert config.noise_sweep.trials == 5
    assert config.noise_sweep.domain == "spatial"


def test_to_dict_uses_section_names() -> None:
    payload = RunConfig().to_dict()
    assert set(payload) == {
        "global",
        "decompose",
        "metrics",
        "subdivide",
        "noise_sweep",
        "gradcheck",
    }
    assert RunConfig.model_validate(payload).to_dict() == payload


def test_rejects_unknown_keys_and_out_of_range_values(tmp_path: Path) -> None:
    with pytest.raises(ValidationError):
        load_run_config(None, {"global": {"sead": 1}})
    with pytest.raises(ValidationError):
        load_run_config(None, {"subdivide": {"levels": 0}})
    with pytest.raises(ValidationError):
        load_run_config(None, {"gradcheck": {"size": 500}})


def test_config_file_errors(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        load_run_config(tmp_path / "missing.json")

    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ValueError, match="not valid JSON"):
        load_run_config(broken)

    listed = tmp_path / "list.json"
    listed.write_text("[]", encoding="utf-8")
    with pytest.raises(ValueError, match="JSON object"):
        load_run_config(listed)

    scalar_section = tmp_path / "scalar.json"
    scalar_section.write_text('{"global": 3}', encoding="utf-8")
    with pytest.raises(ValueError, match="must be a JSON object"):
        load_run_config(scalar_section, {"global": {"seed": 1}})
