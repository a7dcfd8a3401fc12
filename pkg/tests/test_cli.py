import json
import sys
import types
from pathlib import Path
from typing import Any

import numpy as np
import pytest
from mesh_spectra.cli import main
from mesh_spectra.fixtures import make_disc_fixture, make_icosphere
from mesh_spectra.hand_model_io import dump_hand_model
from mesh_spectra.mesh_core import TriangleMesh
from mesh_spectra.obj_io import read_obj_file, write_obj_file
from mesh_spectra.subdiv_model import HandModel, subdivide_mesh


@pytest.fixture(autouse=True)
def _no_shared_cache(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("MESHSPECTRA_CACHE", raising=False)


def _write(path: Path, mesh: TriangleMesh) -> Path:
    write_obj_file(path, mesh)
    return path


def _run(capsys: pytest.CaptureFixture[str], argv: list[str]) -> tuple[int, dict[str, Any], str]:
    code = main(argv)
    captured = capsys.readouterr()
    payload = json.loads(captured.out) if captured.out.strip() else {}
    return code, payload, captured.err


def _events(out: Path) -> list[dict[str, Any]]:
    return [json.loads(line) for line in (out / "events.jsonl").read_text().splitlines()]


def test_fixture_disc_writes_hand_scale_mesh(tmp_path: Path, capsys) -> None:
    out = tmp_path / "out"
    code, payload, _ = _run(
        capsys, ["fixture", "disc", "--vertices", "778", "--boundary", "16", "--out", str(out)]
    )
    assert code == 0
    assert payload["vertex_count"] == 778 and payload["face_count"] == 1538
    assert payload["outputs"] == ["disc_778_1538_16.obj"]
    assert read_obj_file(out / "disc_778_1538_16.obj").vertex_count == 778
    assert [row["status"] for row in _events(out)] == ["ok"]

    code, _, err = _run(
        capsys,
        ["fixture", "disc", "--vertices", "778", "--boundary", "16", "--faces", "1500",
         "--out", str(out)],
    )
    assert code == 1
    assert "1538" in err


def test_fixture_icosphere_and_validate(tmp_path: Path, capsys) -> None:
    out = tmp_path / "out"
    code, payload, _ = _run(
        capsys, ["fixture", "icosphere", "--level", "1", "--radius", "2.5", "--out", str(out)]
    )
    assert code == 0 and payload["vertex_count"] == 42
    assert _events(out)[0]["arguments"]["inputs"] == []

    code, payload, _ = _run(capsys, ["validate", str(out / "icosphere_1.obj")])
    assert code == 0
    assert payload["euler_characteristic"] == 2
    assert payload["boundary_edge_count"] == 0
    assert payload["tool_version"] == "0.1.0"


def test_decompose_cuts_spectrum_and_bands(tmp_path: Path, capsys) -> None:
    mesh_path = _write(tmp_path / "disc.obj", make_disc_fixture(120, 214, 24))
    out = tmp_path / "out"
    code, payload, _ = _run(
        capsys,
        ["decompose", str(mesh_path), "--spectrum", "--cuts", "0,19,119", "--bands", "auto",
         "--out", str(out)],
    )

    assert code == 0
    assert payload["outputs"] == [
        "spectrum.csv",
        "cumulative_00000.obj",
        "cumulative_00019.obj",
        "cumulative_00119.obj",
        "cumulative_residuals.csv",
        "band_energy.csv",
        "provenance.json",
    ]
    assert payload["cumulative_residuals_mm"]["119"] == 0.0
    assert len((out / "spectrum.csv").read_text().splitlines()) == 121
    np.testing.assert_allclose(
        read_obj_file(out / "cumulative_00119.obj").vertices,
        read_obj_file(mesh_path).vertices,
        atol=1e-6,
    )
    assert list((out / ".basis_cache").glob("basis-*.npz"))
    provenance = json.loads((out / "provenance.json").read_text())
    assert provenance["config"]["cuts"] == [0, 19, 119]


def test_decompose_rerun_from_cached_basis_is_byte_identical(tmp_path: Path, capsys) -> None:
    mesh_path = _write(tmp_path / "disc.obj", make_disc_fixture(120, 214, 24))
    out = tmp_path / "out"
    argv = ["decompose", str(mesh_path), "--spectrum", "--cuts", "9,60,119", "--out", str(out)]

    def _snapshot() -> dict[str, bytes]:
        return {
            path.name: path.read_bytes()
            for path in sorted(out.iterdir())
            if path.is_file() and path.name != "events.jsonl"
        }

    assert main(argv) == 0
    fresh = capsys.readouterr().out
    fresh_files = _snapshot()
    assert list((out / ".basis_cache").glob("basis-*.npz"))

    assert main(argv) == 0
    assert capsys.readouterr().out == fresh
    assert _snapshot() == fresh_files


def test_decompose_errors_map_to_exit_codes(tmp_path: Path, capsys) -> None:
    mesh_path = _write(tmp_path / "sphere.obj", make_icosphere(1))
    out = tmp_path / "out"

    assert _run(capsys, ["decompose", str(mesh_path), "--out", str(out)])[0] == 1
    missing = ["decompose", str(tmp_path / "nope.obj"), "--spectrum", "--out", str(out)]
    assert _run(capsys, missing)[0] == 3
    assert _run(capsys, ["decompose", str(mesh_path), "--cuts", "5,3", "--out", str(out)])[0] == 1

    code, _, err = _run(
        capsys, ["decompose", str(mesh_path), "--cuts", "0,42", "--out", str(out)]
    )
    assert code == 1 and "exceeds basis size" in err
    assert _events(out)[-1]["status"] == "error:1"
    assert _run(capsys, ["decompose", str(mesh_path), "--bands", "auto", "--out", str(out)])[0] == 1

    fresh = tmp_path / "fresh"
    code, _, err = _run(
        capsys,
        ["decompose", str(mesh_path), "--spectrum", "--dense-ceiling", "10", "--out", str(fresh)],
    )
    assert code == 2 and "GiB" in err
    code, _, _ = _run(
        capsys,
        ["decompose", str(mesh_path), "--spectrum", "--dense-ceiling", "10", "--allow-large",
         "--out", str(fresh)],
    )
    assert code == 0


def test_metrics_identical_meshes(tmp_path: Path, capsys) -> None:
    mesh_path = _write(tmp_path / "sphere.obj", make_icosphere(2, radius=40.0))
    csv_path = tmp_path / "msnr.csv"
    code, payload, _ = _run(
        capsys,
        ["metrics", str(mesh_path), str(mesh_path), "--per-frequency-csv", str(csv_path)],
    )
    assert code == 0
    assert payload["mpve_mm"] == 0.0
    assert payload["chamfer_mm"] == 0.0
    assert payload["frequency_loss"] == 0.0
    assert payload["msnr"] == {"mean": 8.0, "clamp_count": 162}
    assert payload["mpjpe_mm"] is None
    assert len(csv_path.read_text().splitlines()) == 163


def test_metrics_resolution_mismatch_and_subdivided_prediction(tmp_path: Path, capsys) -> None:
    coarse = make_icosphere(0, radius=10.0)
    pred_path = _write(tmp_path / "pred.obj", coarse)
    gt_path = _write(tmp_path / "gt.obj", subdivide_mesh(coarse, 1))

    code, _, err = _run(capsys, ["metrics", str(pred_path), str(gt_path)])
    assert code == 1
    assert "subdivide" in err

    code, payload, _ = _run(
        capsys, ["metrics", str(pred_path), str(gt_path), "--subdivide-pred", "1",
                 "--chamfer-mode", "surface"]
    )
    assert code == 0
    assert payload["vertex_count"] == 42
    assert payload["mpve_mm"] == 0.0
    assert payload["chamfer_mode"] == "surface"


def test_metrics_weighted_total_loss_and_joints(tmp_path: Path, capsys) -> None:
    paths = []
    for level in range(3):
        mesh = make_icosphere(level, radius=40.0)
        noisy = mesh.with_vertices(
            mesh.vertices + np.random.default_rng(level).normal(scale=0.2, size=mesh.vertices.shape)
        )
        paths.append((_write(tmp_path / f"pred{level}.obj", noisy),
                       _write(tmp_path / f"gt{level}.obj", mesh)))
    joints = np.random.default_rng(5).normal(size=(21, 3))
    moved = joints.copy()
    moved[0, 0] += 21.0
    (tmp_path / "pj.json").write_text(json.dumps(moved.tolist()))
    (tmp_path / "gj.json").write_text(json.dumps(joints.tolist()))

    argv = [
        "metrics",
        str(paths[2][0]),
        str(paths[2][1]),
        "--weights",
        '{"lambda_J": 2.0}',
        "--level",
        str(paths[0][0]),
        str(paths[0][1]),
        "--level",
        str(paths[1][0]),
        str(paths[1][1]),
        "--pred-joints",
        str(tmp_path / "pj.json"),
        "--gt-joints",
        str(tmp_path / "gj.json"),
    ]
    code, payload, _ = _run(capsys, argv)
    assert code == 0
    assert payload["mpjpe_mm"] == pytest.approx(1.0)
    total = payload["total_loss"]
    assert total["joint_term"] == pytest.approx(2.0)
    assert [row["level"] for row in total["levels"]] == [1, 2, 3]
    assert total["levels"][2]["vertex_loss_mm"] == pytest.approx(payload["mpve_mm"])
    assert total["weights"]["lambda_F"] == [60.0, 60.0, 100.0]

    code, _, err = _run(capsys, argv[:5])
    assert code == 1 and "exactly three levels" in err
    assert _run(capsys, argv[:3] + argv[5:11])[0] == 1
    assert _run(capsys, argv[:3] + ["--weights", '{"lambda_Q": 1}'])[0] == 1
    assert _run(capsys, argv[:3] + ["--pred-joints", str(tmp_path / "pj.json")])[0] == 1


def test_subdivide_mesh_and_hand_model(tmp_path: Path, capsys) -> None:
    template = make_disc_fixture(30, 50, 8)
    mesh_path = _write(tmp_path / "hand.obj", template)
    out = tmp_path / "out"

    code, payload, _ = _run(capsys, ["subdivide", str(mesh_path), "--levels", "1", "--out", str(out)])
    assert code == 0
    assert payload["vertex_count"] == 30 + 79
    assert "hand_sub1.obj" in payload["outputs"]

    model = HandModel(
        template=template,
        skinning_weights=np.ones((1, 30)),
        shape_basis=[],
        pose_basis=[],
        residual=np.zeros((30, 3)),
        joint_rest_positions=[[0.0, 0.0, 0.0]],
        joint_parents=(None,),
    )
    model_path = dump_hand_model(model, tmp_path / "model.json")
    code, payload, _ = _run(capsys, ["subdivide", str(model_path), "--levels", "2", "--out", str(out)])
    assert code == 0
    assert payload["joint_count"] == 1
    assert (out / "model_sub2.json").exists() and (out / "model_sub2.obj").exists()

    assert _run(capsys, ["subdivide", str(mesh_path), "--levels", "0", "--out", str(out)])[0] == 1


def test_noise_sweep_outputs_are_reproducible(tmp_path: Path, capsys) -> None:
    mesh_path = _write(tmp_path / "disc.obj", make_disc_fixture(120, 214, 24))
    texts = []
    for name in ("a", "b"):
        out = tmp_path / name
        code, payload, _ = _run(
            capsys,
            ["noise-sweep", str(mesh_path), "--amplitudes", "0,0.3", "--trials", "2",
             "--seed", "4", "--out", str(out)],
        )
        assert code == 0
        assert payload["rows"] == 16
        assert payload["canonical_bands"] is False
        assert payload["outputs"] == ["noise_sweep.csv", "sweep_summary.json", "provenance.json"]
        texts.append((out / "noise_sweep.csv").read_bytes())
    assert texts[0] == texts[1]

    provenance = json.loads((tmp_path / "a" / "provenance.json").read_text())
    assert provenance["seed"] == 4 and provenance["amplitudes_mm"] == [0.0, 0.3]

    code, _, err = _run(
        capsys, ["noise-sweep", str(mesh_path), "--bands", "canonical", "--out", str(tmp_path)]
    )
    assert code == 1 and "canonical" in err


def test_noise_sweep_reports_to_wandb(tmp_path: Path, capsys, monkeypatch) -> None:
    runs: list[Any] = []

    class _Run:
        url = "https://example.test/run/1"

        def __init__(self) -> None:
            self.summary: dict[str, Any] = {}
            self.logged: list[int] = []
            self.artifacts: list[tuple[Any, list[str]]] = []
            self.finished = False

        def log(self, payload: dict[str, Any], *, step: int) -> None:
            self.logged.append(step)

        def log_artifact(self, artifact: Any, *, aliases: list[str]) -> None:
            self.artifacts.append((artifact, aliases))

        def finish(self) -> None:
            self.finished = True

    class _Artifact:
        def __init__(self, *, name: str, type: str) -> None:
            self.name = name
            self.files: list[str] = []

        def add_file(self, path: str) -> None:
            self.files.append(path)

    def _init(**kwargs: Any) -> _Run:
        runs.append(_Run())
        return runs[-1]

    monkeypatch.setitem(sys.modules, "wandb", types.SimpleNamespace(init=_init, Artifact=_Artifact))
    mesh_path = _write(tmp_path / "disc.obj", make_disc_fixture(120, 214, 24))
    code, _, _ = _run(
        capsys,
        ["noise-sweep", str(mesh_path), "--amplitudes", "0,0.3", "--trials", "1",
         "--wandb-mode", "offline", "--out", str(tmp_path / "out")],
    )
    assert code == 0
    run = runs[0]
    assert run.logged == list(range(16))
    assert run.artifacts[0][1] == ["latest", "seed-0"]
    assert run.summary["rows"] == 16
    assert run.finished


def test_gradcheck_pass_and_corrupted_fail(capsys) -> None:
    code, payload, _ = _run(capsys, ["gradcheck", "--seed", "1"])
    assert code == 0
    assert payload["passed"] is True and payload["seed"] == 1

    code, payload, err = _run(capsys, ["gradcheck", "--corrupt-gradient"])
    assert code == 2
    assert payload["passed"] is False
    assert "FAIL" in err


def test_remesh_and_smooth(tmp_path: Path, capsys) -> None:
    template = _write(tmp_path / "coarse.obj", make_icosphere(1, radius=10.0))
    target = _write(tmp_path / "fine.obj", make_icosphere(3, radius=10.0))
    out = tmp_path / "out"

    code, payload, _ = _run(capsys, ["remesh", str(template), str(target), "--out", str(out)])
    assert code == 0
    assert payload["max_snap_distance_mm"] <= 1e-9
    assert (out / "coarse_remeshed.obj").exists()

    code, payload, _ = _run(capsys, ["smooth", str(target), "--out", str(out)])
    assert code == 0
    assert payload["masked_vertex_count"] > 0
    assert (out / "fine_smoothed.obj").exists()
    assert [row["command"] for row in _events(out)] == ["remesh", "smooth"]


def test_config_file_and_argument_errors(tmp_path: Path, capsys) -> None:
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"global": {"seed": 3}, "gradcheck": {"size": 12}}))
    code, payload, _ = _run(capsys, ["gradcheck", "--config", str(config)])
    assert code == 0
    assert payload["seed"] == 3 and payload["vertex_count"] == 12

    config.write_text(json.dumps({"global": {"colour": "red"}}))
    assert _run(capsys, ["gradcheck", "--config", str(config)])[0] == 1
    assert _run(capsys, ["gradcheck", "--config", str(tmp_path / "absent.json")])[0] == 3

    with pytest.raises(SystemExit) as excinfo:
        main(["metrics", "a.obj", "b.obj", "--chamfer-mode", "hausdorff"])
    assert excinfo.value.code == 1
