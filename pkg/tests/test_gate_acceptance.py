import json
from pathlib import Path

import pytest
from mesh_spectra.fixtures import disc_counts
from tools.gate_acceptance import (
    CRITERIA,
    AcceptanceGateConfig,
    _parse_criteria_csv,
    run_acceptance_gate,
)

FAST_CRITERIA = ("subdivision_chain", "msnr_scale", "chamfer_and_closest_point")


def _config(tmp_path: Path, **overrides) -> AcceptanceGateConfig:
    values = {
        "output_path": tmp_path / "gate.json",
        "run_id": "gate-test",
        "criteria": FAST_CRITERIA,
        "chamfer_instances": 3,
        "closest_point_queries": 20,
    }
    values.update(overrides)
    return AcceptanceGateConfig(**values)


def test_fast_criteria_pass_and_write_report(tmp_path: Path) -> None:
    report = run_acceptance_gate(_config(tmp_path))

    assert report["summary"]["pass"] is True
    assert report["summary"]["criterion_status"] == {name: "pass" for name in FAST_CRITERIA}
    chain = report["criteria"][0]["details"]
    assert chain["counts"] == [(778, 1538), (3093, 6152), (12337, 24608)]

    written = json.loads((tmp_path / "gate.json").read_text())
    assert written["run_id"] == "gate-test"
    assert written["config"]["criteria"] == list(FAST_CRITERIA)


def test_refuses_to_overwrite_existing_report(tmp_path: Path) -> None:
    (tmp_path / "gate.json").write_text("{}")
    with pytest.raises(ValueError, match="Output already exists"):
        run_acceptance_gate(_config(tmp_path))


def test_failing_check_fails_summary(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    import tools.gate_acceptance as gate

    monkeypatch.setitem(gate._CHECKS, "msnr_scale", lambda cfg: {"pass": False, "why": "forced"})
    report = run_acceptance_gate(_config(tmp_path, criteria=("msnr_scale",)))

    assert report["summary"]["pass"] is False
    assert report["criteria"][0]["status"] == "fail"
    assert report["criteria"][0]["details"] == {"why": "forced"}


def test_criteria_parsing() -> None:
    assert _parse_criteria_csv(" MSNR_SCALE,msnr_scale,noise_sweep ") == (
        "msnr_scale",
        "noise_sweep",
    )
    assert set(CRITERIA) >= set(FAST_CRITERIA)
    with pytest.raises(ValueError, match="Unsupported criterion"):
        _parse_criteria_csv("msnr_scale,speed")
    with pytest.raises(ValueError, match="At least one"):
        _parse_criteria_csv(" , ")
    with pytest.raises(ValueError, match="Unsupported criterion"):
        run_acceptance_gate(AcceptanceGateConfig(criteria=("speed",)))


@pytest.mark.slow
def test_sweep_and_cli_determinism_criteria_pass(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    import tools.gate_acceptance as gate

    monkeypatch.setattr(gate, "HAND_DISC_COUNTS", disc_counts(200, 30))
    criteria = ("noise_sweep", "cli_determinism")
    report = run_acceptance_gate(_config(tmp_path, criteria=criteria, sweep_trials=4))

    assert report["summary"]["criterion_status"] == {name: "pass" for name in criteria}
    sweep, determinism = (item["details"] for item in report["criteria"])
    assert sweep["zero_amplitude_ok"] and sweep["high_band_more_sensitive"]
    assert len(sweep["bands"]) >= 2
    assert determinism["mismatched_commands"] == []
