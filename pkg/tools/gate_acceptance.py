from __future__ import annotations

import argparse
import contextlib
import io
import json
import sys
import tempfile
import time
from collections.abc import Callable
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

if __package__ is None or __package__ == "":
    REPO_ROOT = Path(__file__).resolve().parents[1]
    PYTHON_SRC = REPO_ROOT / "python"
    if str(PYTHON_SRC) not in sys.path:
        sys.path.insert(0, str(PYTHON_SRC))

from mesh_spectra.cli import main as cli_main  # noqa: E402
from mesh_spectra.eigensolvers import eigendecompose_dense, eigendecompose_partial  # noqa: E402
from mesh_spectra.experiments import (  # noqa: E402
    default_amplitudes,
    make_octave_bands,
    run_noise_sweep,
)
from mesh_spectra.fixtures import disc_counts, make_disc_fixture, make_icosphere  # noqa: E402
from mesh_spectra.graph_spectral import (  # noqa: E402
    Band,
    band_component,
    basis_diagnostics,
    build_laplacian,
    cumulative_reconstruction,
    cumulative_residuals,
    decile_log_amplitudes,
    gft,
    igft,
    spectrum_profile,
)
from mesh_spectra.mesh_core import TriangleMesh, build_graph  # noqa: E402
from mesh_spectra.metrics_losses import (  # noqa: E402
    chamfer_distance,
    frequency_loss,
    msnr,
    run_gradcheck,
)
from mesh_spectra.obj_io import write_obj_file  # noqa: E402
from mesh_spectra.subdiv_model import subdivide_mesh  # noqa: E402
from mesh_spectra.surface import SurfaceIndex  # noqa: E402

CRITERIA = (
    "subdivision_chain",
    "spectral_soundness",
    "partial_solver_agreement",
    "frequency_loss",
    "msnr_scale",
    "noise_sweep",
    "chamfer_and_closest_point",
    "cumulative_reconstruction",
    "spectrum_decay",
    "cli_determinism",
)

HAND_DISC_COUNTS = (778, 1538, 16)


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _default_run_id(prefix: str) -> str:
    return f"{prefix}-{datetime.now(timezone.utc).strftime('%Y%m%dT%H%M%SZ')}"


def _parse_criteria_csv(raw: str) -> tuple[str, ...]:
    values = [item.strip().lower() for item in raw.split(",") if item.strip() != ""]
    deduped = tuple(dict.fromkeys(values))
    for value in deduped:
        if value not in CRITERIA:
            raise ValueError(
                f"Unsupported criterion in --criteria: {value!r}. Supported: {', '.join(CRITERIA)}"
            )
    if not deduped:
        raise ValueError("At least one criterion must be supplied.")
    return deduped


@dataclass(frozen=True)
class AcceptanceGateConfig:
    output_path: Path | None = None
    run_id: str | None = None
    run_id_prefix: str = "acceptance-gate"
    criteria: tuple[str, ...] = CRITERIA
    seed: int = 0
    sweep_trials: int = 20
    chamfer_instances: int = 20
    closest_point_queries: int = 100


def _validate_config(cfg: AcceptanceGateConfig) -> None:
    if not cfg.criteria:
        raise ValueError("criteria must be non-empty.")
    for name in cfg.criteria:
        if name not in CRITERIA:
            raise ValueError(f"Unsupported criterion: {name!r}")
    if cfg.sweep_trials <= 0:
        raise ValueError("sweep_trials must be positive.")
    if cfg.chamfer_instances <= 0:
        raise ValueError("chamfer_instances must be positive.")
    if cfg.closest_point_queries <= 0:
        raise ValueError("closest_point_queries must be positive.")


def _hand_disc() -> TriangleMesh:
    return make_disc_fixture(*HAND_DISC_COUNTS)


def _small_fixtures() -> dict[str, TriangleMesh]:
    return {
        "icosphere_2": make_icosphere(2, radius=40.0),
        "icosphere_3": make_icosphere(3, radius=40.0),
        "disc_778": _hand_disc(),
    }


def _dense(mesh: TriangleMesh):
    laplacian = build_laplacian(build_graph(mesh))
    return laplacian, eigendecompose_dense(laplacian)


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), np.finfo(np.float64).tiny))


def _check_subdivision_chain(cfg: AcceptanceGateConfig) -> dict[str, Any]:
    mesh = _hand_disc()
    counts = [(mesh.vertex_count, mesh.face_count)]
    for levels in (1, 2):
        refined = subdivide_mesh(mesh, levels)
        counts.append((refined.vertex_count, refined.face_count))
    expected = [(778, 1538), (3093, 6152), (12337, 24608)]
    return {"pass": counts == expected, "counts": counts, "expected": expected}


def _check_spectral_soundness(cfg: AcceptanceGateConfig) -> dict[str, Any]:
    rows = []
    ok = True
    for name, mesh in _small_fixtures().items():
        laplacian, basis = _dense(mesh)
        diagnostics = basis_diagnostics(laplacian, basis)
        signal = mesh.vertices
        coeffs = gft(basis, signal)
        round_trip = _relative(igft(basis, coeffs), signal)
        parseval = abs(
            float(np.sum(coeffs.coefficients**2)) - float(np.sum(signal**2))
        ) / float(np.sum(signal**2))
        octaves = make_octave_bands(basis.size)
        partition = [Band(0, octaves[0].lo - 1), *octaves]
        reassembled = sum(band_component(basis, signal, band) for band in partition)
        band_error = _relative(reassembled, signal)
        residual = diagnostics["max_residual"] / diagnostics["residual_scale"]
        row_ok = (
            residual <= 1e-8
            and diagnostics["orthonormality_error"] <= 1e-8
            and round_trip <= 1e-9
            and parseval <= 1e-9
            and band_error <= 1e-9
        )
        ok = ok and row_ok
        rows.append(
            {
                "fixture": name,
                "vertex_count": mesh.vertex_count,
                "relative_residual": residual,
                "orthonormality_error": diagnostics["orthonormality_error"],
                "gft_round_trip": round_trip,
                "parseval": parseval,
                "band_partition": band_error,
                "pass": row_ok,
            }
        )
    return {"pass": ok, "fixtures": rows}


def _check_partial_solver(cfg: AcceptanceGateConfig) -> dict[str, Any]:
    fixtures = {
        "icosphere_0": make_icosphere(0),
        "icosphere_1": make_icosphere(1),
        "icosphere_2": make_icosphere(2),
        "disc_200": make_disc_fixture(*disc_counts(200, 30)),
        "disc_500": make_disc_fixture(*disc_counts(500, 40)),
    }
    rows = []
    ok = True
    for name, mesh in fixtures.items():
        laplacian, dense = _dense(mesh)
        k = min(10, mesh.vertex_count - 1)
        partial = eigendecompose_partial(laplacian, k, seed=cfg.seed)
        gap = float(np.max(np.abs(partial.eigenvalues - dense.eigenvalues[:k])))
        ok = ok and gap <= 1e-6
        rows.append({"fixture": name, "k": k, "max_eigenvalue_gap": gap})
    return {"pass": ok, "fixtures": rows}


def _check_frequency_loss(cfg: AcceptanceGateConfig) -> dict[str, Any]:
    mesh = make_disc_fixture(*disc_counts(60, 15))
    _, basis = _dense(mesh)
    gt = mesh.vertices
    rng = np.random.default_rng(cfg.seed)
    pred = gt + rng.normal(0.0, 0.5, size=gt.shape)
    at_truth = frequency_loss(basis, gt, gt)
    # With epsilon removed the loss is exactly scale invariant.
    scaled = frequency_loss(basis, 10.0 * pred, 10.0 * gt, epsilon=0.0)
    scale_gap = abs(scaled - frequency_loss(basis, pred, gt, epsilon=0.0))
    reports = [run_gradcheck(seed=seed, size=30) for seed in (0, 1, 2)]
    ok = at_truth == 0.0 and scale_gap <= 1e-10 and all(report.passed for report in reports)
    return {
        "pass": ok,
        "loss_at_truth": at_truth,
        "scale_invariance_gap": scale_gap,
        "gradcheck": [report.to_dict() for report in reports],
    }


def _check_msnr_scale(cfg: AcceptanceGateConfig) -> dict[str, Any]:
    mesh = make_icosphere(2, radius=40.0)
    _, basis = _dense(mesh)
    pred = mesh.vertices
    identical = msnr(basis, pred, pred).mean
    frequency = 2
    direction = basis.eigenvectors[:, frequency : frequency + 1] @ np.array([[0.3, -0.2, 0.1]])
    single = msnr(basis, pred, pred - direction).per_frequency[frequency]
    doubled = msnr(basis, pred, pred - 2.0 * direction).per_frequency[frequency]
    drop = float(single - doubled)
    ok = identical == 8.0 and abs(drop - np.log10(2.0)) <= 1e-6
    return {"pass": ok, "msnr_identical": identical, "doubling_drop": drop}


def _check_noise_sweep(cfg: AcceptanceGateConfig) -> dict[str, Any]:
    mesh = _hand_disc()
    _, basis = _dense(mesh)
    bands = make_octave_bands(basis.size)
    report = run_noise_sweep(
        mesh, bands, default_amplitudes(), cfg.sweep_trials, cfg.seed, basis=basis
    )
    zero_rows = [row for row in report.rows if row.max_amplitude_mm == 0.0]
    zero_ok = all(row.mean_mpve_mm == 0.0 and row.mean_msnr == 8.0 for row in zero_rows)
    sensitivity = report.sensitivity()
    monotone_ok = all(item.msnr_inversions <= 1 for item in sensitivity)
    direction_ok = sensitivity[-1].msnr_drop_at_max > sensitivity[0].msnr_drop_at_max
    return {
        "pass": zero_ok and monotone_ok and direction_ok,
        "zero_amplitude_ok": zero_ok,
        "monotone_ok": monotone_ok,
        "high_band_more_sensitive": direction_ok,
        "bands": [item.to_dict() for item in sensitivity],
    }


def _brute_chamfer(a: np.ndarray, b: np.ndarray) -> float:
    distances = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return 0.5 * (float(np.mean(distances.min(axis=1))) + float(np.mean(distances.min(axis=0))))


def _check_chamfer(cfg: AcceptanceGateConfig) -> dict[str, Any]:
    rng = np.random.default_rng(cfg.seed)
    chamfer_gap = 0.0
    for _ in range(cfg.chamfer_instances):
        a = rng.uniform(-1.0, 1.0, size=(50, 3))
        b = rng.uniform(-1.0, 1.0, size=(50, 3))
        fast = chamfer_distance(TriangleMesh(a), TriangleMesh(b))
        chamfer_gap = max(chamfer_gap, abs(fast - _brute_chamfer(a, b)))

    surface = make_icosphere(2, radius=40.0)
    index = SurfaceIndex(surface)
    queries = rng.uniform(-60.0, 60.0, size=(cfg.closest_point_queries, 3))
    fast_query = index.query(queries)
    exhaustive = index.query_exhaustive(queries)
    point_gap = float(np.max(np.abs(fast_query.distances - exhaustive.distances)))
    return {
        "pass": chamfer_gap <= 1e-12 and point_gap <= 1e-9,
        "chamfer_max_gap": chamfer_gap,
        "closest_point_max_gap": point_gap,
    }


def _check_cumulative(cfg: AcceptanceGateConfig) -> dict[str, Any]:
    rows = []
    ok = True
    for name, mesh in _small_fixtures().items():
        _, basis = _dense(mesh)
        n = basis.size
        cuts = sorted({0, 4, 19, 79, n // 4, n // 2, n - 1})
        residuals = cumulative_residuals(basis, mesh.vertices, cuts)
        final = cumulative_reconstruction(basis, mesh.vertices, [n - 1])[0]
        final_gap = float(np.max(np.abs(final - mesh.vertices)))
        non_increasing = bool(np.all(np.diff(residuals) <= 0.0))
        ok = ok and non_increasing and final_gap <= 1e-6
        rows.append(
            {
                "fixture": name,
                "residuals_mm": [float(x) for x in residuals],
                "non_increasing": non_increasing,
                "final_reconstruction_gap_mm": final_gap,
            }
        )
    return {"pass": ok, "fixtures": rows}


def _check_spectrum_decay(cfg: AcceptanceGateConfig) -> dict[str, Any]:
    mesh = make_icosphere(2)
    _, basis = _dense(mesh)
    low, high = decile_log_amplitudes(spectrum_profile(basis, mesh.vertices))
    return {"pass": low - high >= 1.0, "low_decile": low, "high_decile": high}


def _run_cli(argv: list[str]) -> tuple[int, str]:
    stdout = io.StringIO()
    with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(io.StringIO()):
        code = cli_main(argv)
    return code, stdout.getvalue()


def _snapshot(out_dir: Path) -> dict[str, bytes]:
    return {
        path.relative_to(out_dir).as_posix(): path.read_bytes()
        for path in sorted(out_dir.rglob("*"))
        if path.is_file() and path.name != "events.jsonl" and ".basis_cache" not in path.parts
    }


def _check_cli_determinism(cfg: AcceptanceGateConfig) -> dict[str, Any]:
    with tempfile.TemporaryDirectory() as raw:
        root = Path(raw)
        mesh_path = root / "disc.obj"
        write_obj_file(mesh_path, make_disc_fixture(*disc_counts(200, 30)))
        out = root / "out"
        seed = str(cfg.seed)
        commands = [
            ["decompose", str(mesh_path), "--spectrum", "--cuts", "9,49,199", "--out", str(out)],
            [
                "noise-sweep",
                str(mesh_path),
                "--amplitudes",
                "0,0.3",
                "--trials",
                "2",
                "--seed",
                seed,
                "--out",
                str(out),
            ],
            ["subdivide", str(mesh_path), "--levels", "1", "--out", str(out)],
            ["metrics", str(mesh_path), str(mesh_path), "--out", str(out)],
            ["gradcheck", "--seed", seed, "--size", "20"],
        ]
        mismatched = []
        for argv in commands:
            first = _run_cli(argv)
            first_files = _snapshot(out)
            second = _run_cli(argv)
            if first != second or first_files != _snapshot(out) or first[0] != 0:
                mismatched.append(argv[0])
    return {"pass": not mismatched, "mismatched_commands": mismatched}


_CHECKS: dict[str, Callable[[AcceptanceGateConfig], dict[str, Any]]] = {
    "subdivision_chain": _check_subdivision_chain,
    "spectral_soundness": _check_spectral_soundness,
    "partial_solver_agreement": _check_partial_solver,
    "frequency_loss": _check_frequency_loss,
    "msnr_scale": _check_msnr_scale,
    "noise_sweep": _check_noise_sweep,
    "chamfer_and_closest_point": _check_chamfer,
    "cumulative_reconstruction": _check_cumulative,
    "spectrum_decay": _check_spectrum_decay,
    "cli_determinism": _check_cli_determinism,
}


def _serialize_config(cfg: AcceptanceGateConfig) -> dict[str, Any]:
    payload = asdict(cfg)
    payload["output_path"] = cfg.output_path.as_posix() if cfg.output_path is not None else None
    payload["criteria"] = list(cfg.criteria)
    return payload


def run_acceptance_gate(cfg: AcceptanceGateConfig) -> dict[str, Any]:
    _validate_config(cfg)
    run_id = cfg.run_id or _default_run_id(cfg.run_id_prefix)

    output_path = cfg.output_path
    if output_path is None:
        output_path = Path("artifacts/acceptance") / f"{run_id}.json"
    if output_path.exists():
        raise ValueError(f"Output already exists: {output_path.as_posix()}")

    results: list[dict[str, Any]] = []
    all_pass = True
    for name in cfg.criteria:
        started = time.perf_counter()
        outcome = _CHECKS[name](cfg)
        elapsed = time.perf_counter() - started
        passed = bool(outcome.pop("pass"))
        all_pass = all_pass and passed
        results.append(
            {
                "criterion": name,
                "status": "pass" if passed else "fail",
                "seconds": elapsed,
                "details": outcome,
            }
        )

    report = {
        "generated_at": now_iso(),
        "run_id": run_id,
        "config": _serialize_config(cfg),
        "summary": {
            "pass": all_pass,
            "criteria_evaluated": list(cfg.criteria),
            "criterion_status": {result["criterion"]: result["status"] for result in results},
        },
        "criteria": results,
        "artifacts": {"report_path": output_path.as_posix()},
    }

    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(json.dumps(report, indent=2), encoding="utf-8")
    return report


def _parse_args() -> AcceptanceGateConfig:
    parser = argparse.ArgumentParser(
        description="Run the mesh-spectra acceptance criteria and write a JSON gate report."
    )
    parser.add_argument("--output-path", type=Path, default=None)
    parser.add_argument("--run-id", type=str, default=None)
    parser.add_argument("--run-id-prefix", type=str, default="acceptance-gate")
    parser.add_argument("--criteria", type=str, default=",".join(CRITERIA))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sweep-trials", type=int, default=20)
    parser.add_argument("--chamfer-instances", type=int, default=20)
    parser.add_argument("--closest-point-queries", type=int, default=100)

    args = parser.parse_args()
    return AcceptanceGateConfig(
        output_path=args.output_path,
        run_id=args.run_id,
        run_id_prefix=args.run_id_prefix,
        criteria=_parse_criteria_csv(args.criteria),
        seed=args.seed,
        sweep_trials=args.sweep_trials,
        chamfer_instances=args.chamfer_instances,
        closest_point_queries=args.closest_point_queries,
    )


def main() -> int:
    cfg = _parse_args()
    report = run_acceptance_gate(cfg)
    print(json.dumps(report, indent=2))
    summary = report.get("summary", {})
    return 0 if bool(summary.get("pass", False)) else 2


if __name__ == "__main__":
    raise SystemExit(main())
