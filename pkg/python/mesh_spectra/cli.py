"""`mesh-spectra` command line.

Machine-readable results go to stdout as JSON, diagnostics to stderr. Exit codes: 0 success,
1 input/validation/argument errors, 2 numerical or resource failures (including a failed
gradient check), 3 I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NoReturn

import numpy as np
from pydantic import ValidationError

from .basis_cache import full_basis, resolve_cache_dir
from .config import RunConfig, load_run_config
from .constants import TOOL_VERSION
from .eigensolvers import estimate_dense_memory_bytes
from .errors import NumericalError, ResourceLimitError
from .experiments import (
    BAND_ENERGY_FILE_NAME,
    SPECTRUM_FILE_NAME,
    SWEEP_FILE_NAME,
    SWEEP_SUMMARY_FILE_NAME,
    SweepRow,
    default_amplitudes,
    export_band_energies,
    export_cumulative_series,
    export_spectrum,
    run_noise_sweep,
    select_bands,
    write_provenance,
)
from .fixtures import disc_counts, make_disc_fixture, make_icosphere
from .graph_spectral import SpectralBasis
from .hand_model_io import dump_hand_model, load_hand_model
from .mesh_core import TriangleMesh, validate
from .metrics_losses import (
    LevelInputs,
    LossWeights,
    chamfer_distance,
    frequency_loss,
    frequency_loss_gradient,
    make_smooth_mask,
    masked_smooth,
    mpjpe,
    msnr,
    per_vertex_error,
    run_gradcheck,
    total_loss,
)
from .obj_io import read_obj_file, write_obj_file
from .subdiv_model import subdivide_mesh, subdivide_model
from .surface import snap_to_surface
from .tracking import JsonlEventLogger, WandbSweepLogger

PROG = "mesh-spectra"

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

_CORRUPTION_FACTOR = 1.1


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        print(f"[{PROG}] {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


@dataclass
class _Run:
    """Per-invocation state shared by the command handlers."""

    command: str
    config: RunConfig
    inputs: list[str]
    outputs: list[Path] = field(default_factory=list)

    @property
    def out_dir(self) -> Path:
        return Path(self.config.global_.out)

    def log(self, message: str) -> None:
        print(f"[{PROG}:{self.command}] {message}", file=sys.stderr)

    def wrote(self, path: Path) -> Path:
        self.outputs.append(path)
        return path

    def output_names(self) -> list[str]:
        names = []
        for path in self.outputs:
            try:
                names.append(path.relative_to(self.out_dir).as_posix())
            except ValueError:
                names.append(path.as_posix())
        return names

    def record(self, status: str) -> None:
        JsonlEventLogger.for_output_dir(self.out_dir).log_event(
            command=self.command,
            arguments={"inputs": self.inputs, "config": self.config.to_dict()},
            outputs=self.output_names(),
            status=status,
        )


def _emit(payload: dict[str, Any]) -> None:
    print(json.dumps({"tool_version": TOOL_VERSION, **payload}, indent=2, sort_keys=True))


def _parse_int_csv(raw: str, flag: str) -> list[int]:
    try:
        return [int(item) for item in raw.split(",") if item.strip() != ""]
    except ValueError as exc:
        raise ValueError(f"{flag} expects comma-separated integers, got {raw!r}") from exc


def _parse_float_csv(raw: str, flag: str) -> list[float]:
    try:
        return [float(item) for item in raw.split(",") if item.strip() != ""]
    except ValueError as exc:
        raise ValueError(f"{flag} expects comma-separated numbers, got {raw!r}") from exc


def _parse_json_object(raw: str, flag: str) -> dict[str, Any]:
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{flag} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValueError(f"{flag} must be a JSON object")
    return payload


def _load_joints(path: Path) -> np.ndarray:
    if not path.exists():
        raise FileNotFoundError(f"joint file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"joint file {path} is not valid JSON: {exc}") from exc
    joints = np.asarray(payload, dtype=np.float64)
    if joints.ndim != 2 or joints.shape[1] != 3:
        raise ValueError(f"joint file {path} must hold a J x 3 array, got shape {joints.shape}")
    return joints


def _full_basis(run: _Run, mesh: TriangleMesh, *, out_dir: Path | None) -> SpectralBasis:
    settings = run.config.global_
    n = mesh.vertex_count
    if n > settings.dense_ceiling and settings.allow_large:
        gib = estimate_dense_memory_bytes(n) / float(1 << 30)
        run.log(
            f"dense eigensolver on N={n} above ceiling {settings.dense_ceiling}: ~{gib:.2f} GiB"
        )
    configured = None if settings.cache_dir is None else Path(settings.cache_dir)
    return full_basis(
        mesh,
        dense_ceiling=settings.dense_ceiling,
        allow_large=settings.allow_large,
        cache_dir=resolve_cache_dir(out_dir, configured),
    )


def _cmd_decompose(run: _Run, args: argparse.Namespace) -> int:
    section = run.config.decompose
    if not (section.spectrum or section.cuts or section.bands):
        raise ValueError("decompose needs at least one of --spectrum, --cuts or --bands")

    mesh = read_obj_file(args.mesh)
    basis = _full_basis(run, mesh, out_dir=run.out_dir)
    payload: dict[str, Any] = {"command": run.command, "vertex_count": mesh.vertex_count}

    if section.spectrum:
        run.wrote(export_spectrum(mesh, basis, run.out_dir / SPECTRUM_FILE_NAME))
    if section.cuts:
        series = export_cumulative_series(mesh, basis, section.cuts, run.out_dir)
        for path in series.obj_paths:
            run.wrote(path)
        run.wrote(series.csv_path)
        payload["cumulative_residuals_mm"] = dict(
            zip([str(cut) for cut in section.cuts], series.residuals, strict=True)
        )
    if section.bands:
        bands = select_bands(basis.size, section.bands)
        if not bands.canonical:
            run.log(f"octave bands rescaled to N={basis.size}")
        run.wrote(export_band_energies(mesh, basis, bands, run.out_dir / BAND_ENERGY_FILE_NAME))

    run.wrote(
        write_provenance(
            run.out_dir,
            mesh,
            seed=None,
            extra={"command": run.command, "config": section.model_dump(mode="json")},
        )
    )
    run.log(f"wrote {len(run.outputs)} file(s) to {run.out_dir.as_posix()}")
    payload["outputs"] = run.output_names()
    run.record("ok")
    _emit(payload)
    return EXIT_OK


def _cmd_metrics(run: _Run, args: argparse.Namespace) -> int:
    section = run.config.metrics
    settings = run.config.global_
    pred = read_obj_file(args.pred)
    gt = read_obj_file(args.gt)
    if section.subdivide_pred:
        pred = subdivide_mesh(pred, section.subdivide_pred)
        run.log(f"prediction subdivided {section.subdivide_pred}x to {pred.vertex_count} vertices")

    chamfer = chamfer_distance(pred, gt, section.chamfer_mode)
    if pred.vertex_count != gt.vertex_count:
        raise ValueError(
            f"spectral metrics need matching vertex counts, got {pred.vertex_count} and "
            f"{gt.vertex_count}; bring the prediction to the ground-truth resolution with "
            "`mesh-spectra subdivide` or --subdivide-pred"
        )

    basis = _full_basis(run, gt, out_dir=None)
    spectral = msnr(basis, pred.vertices, gt.vertices, log_base=settings.msnr_log_base)
    payload: dict[str, Any] = {
        "command": run.command,
        "vertex_count": gt.vertex_count,
        "mpve_mm": per_vertex_error(pred.vertices, gt.vertices),
        "chamfer_mm": chamfer,
        "chamfer_mode": section.chamfer_mode,
        "msnr": spectral.to_dict(),
        "frequency_loss": frequency_loss(
            basis, pred.vertices, gt.vertices, log_base=settings.loss_log_base
        ),
        "mpjpe_mm": None,
    }

    if (args.pred_joints is None) != (args.gt_joints is None):
        raise ValueError("--pred-joints and --gt-joints must be given together")
    pred_joints = gt_joints = None
    if args.pred_joints is not None:
        pred_joints = _load_joints(args.pred_joints)
        gt_joints = _load_joints(args.gt_joints)
        payload["mpjpe_mm"] = mpjpe(pred_joints, gt_joints)

    if section.weights is not None:
        weights = LossWeights.from_mapping(section.weights)
        levels: list[LevelInputs] = []
        for level_pred_path, level_gt_path in args.level or []:
            level_pred = read_obj_file(level_pred_path)
            level_gt = read_obj_file(level_gt_path)
            levels.append(
                LevelInputs(
                    pred=level_pred.vertices,
                    gt=level_gt.vertices,
                    basis=_full_basis(run, level_gt, out_dir=None),
                )
            )
        levels.append(LevelInputs(pred=pred.vertices, gt=gt.vertices, basis=basis))
        if len(levels) != 3:
            raise ValueError(
                f"--weights requires exactly three levels, got {len(levels)}: the positional "
                "PRED GT pair is the finest, pass the two coarser ones with --level PRED GT "
                "(coarsest first)"
            )
        breakdown = total_loss(
            levels,
            weights,
            pred_joints=pred_joints,
            gt_joints=gt_joints,
            log_base=settings.loss_log_base,
        )
        payload["total_loss"] = breakdown.to_dict()
    elif args.level:
        raise ValueError("--level only applies together with --weights")

    if args.per_frequency_csv is not None:
        csv_path = Path(args.per_frequency_csv)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(spectral.to_csv_text(), encoding="utf-8")
        payload["per_frequency_csv"] = csv_path.as_posix()

    _emit(payload)
    return EXIT_OK


def _cmd_subdivide(run: _Run, args: argparse.Namespace) -> int:
    levels = run.config.subdivide.levels
    source = Path(args.input)
    stem = f"{source.stem}_sub{levels}"
    payload: dict[str, Any] = {"command": run.command, "levels": levels}

    if source.suffix.lower() == ".json":
        model = subdivide_model(load_hand_model(source), levels)
        mesh = model.template
        run.wrote(dump_hand_model(model, run.out_dir / f"{stem}.json"))
        payload["joint_count"] = model.joint_count
    else:
        coarse = read_obj_file(source)
        mesh = subdivide_mesh(coarse, levels)
    obj_path = run.out_dir / f"{stem}.obj"
    write_obj_file(obj_path, mesh)
    run.wrote(obj_path)
    run.wrote(
        write_provenance(
            run.out_dir, mesh, seed=None, extra={"command": run.command, "levels": levels}
        )
    )

    run.log(f"{source.name}: {levels} level(s) -> {mesh.vertex_count} vertices")
    payload.update(
        {
            "vertex_count": mesh.vertex_count,
            "face_count": mesh.face_count,
            "outputs": run.output_names(),
        }
    )
    run.record("ok")
    _emit(payload)
    return EXIT_OK


def _sweep_cell_payload(row: SweepRow) -> dict[str, Any]:
    return {
        "band_lo": row.band_lo,
        "band_hi": row.band_hi,
        "max_amplitude_mm": row.max_amplitude_mm,
        "mean_mpve_mm": row.mean_mpve_mm,
        "mean_msnr": row.mean_msnr,
    }


def _cmd_noise_sweep(run: _Run, args: argparse.Namespace) -> int:
    section = run.config.noise_sweep
    seed = run.config.global_.seed
    amplitudes = (
        tuple(section.amplitudes)
        if section.amplitudes is not None
        else default_amplitudes(section.max_amplitude, section.amplitude_count)
    )
    if not amplitudes:
        raise ValueError("--amplitudes must list at least one value")

    mesh = read_obj_file(args.mesh)
    basis = _full_basis(run, mesh, out_dir=run.out_dir)
    bands = select_bands(basis.size, section.bands)
    if not bands.canonical:
        run.log(f"octave bands rescaled to N={basis.size}")

    run_id = f"noise-sweep-{mesh.content_hash()[:12]}-seed{seed}"
    tracker = WandbSweepLogger.create(
        run_id=run_id,
        project=section.wandb_project,
        config=run.config.to_dict(),
        mode=section.wandb_mode,
        tags=[section.domain, section.bands],
    )

    def _on_cell(band_index: int, amplitude_index: int, row: SweepRow) -> None:
        if tracker is not None:
            step = band_index * len(amplitudes) + amplitude_index
            tracker.log_cell(_sweep_cell_payload(row), step=step)

    report = run_noise_sweep(
        mesh,
        bands,
        amplitudes,
        section.trials,
        seed,
        basis=basis,
        domain=section.domain,
        on_cell=_on_cell,
    )
    csv_path = run.wrote(report.write_csv(run.out_dir / SWEEP_FILE_NAME))
    summary = report.summary_dict()
    summary_path = run.out_dir / SWEEP_SUMMARY_FILE_NAME
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    run.wrote(summary_path)
    run.wrote(
        write_provenance(
            run.out_dir,
            mesh,
            seed=seed,
            extra={
                "command": run.command,
                "amplitudes_mm": list(amplitudes),
                "trials": section.trials,
                "band_mode": section.bands,
                "bands": [[band.lo, band.hi] for band in bands],
                "canonical_bands": bands.canonical,
                "domain": section.domain,
            },
        )
    )

    if tracker is not None:
        tracker.log_csv_artifact(path=csv_path, run_id=run_id, aliases=[f"seed-{seed}"])
        tracker.finish({"rows": len(report.rows)})
        run.log(f"wandb run: {tracker.run_url}")

    run.log(f"{len(bands)} band(s) x {len(amplitudes)} amplitude(s) x {section.trials} trial(s)")
    run.record("ok")
    _emit(
        {
            "command": run.command,
            "rows": len(report.rows),
            "canonical_bands": bands.canonical,
            "bands": summary["bands"],
            "outputs": run.output_names(),
        }
    )
    return EXIT_OK


def _corrupted_gradient(basis: SpectralBasis, pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    return _CORRUPTION_FACTOR * frequency_loss_gradient(basis, pred, gt)


def _cmd_gradcheck(run: _Run, args: argparse.Namespace) -> int:
    section = run.config.gradcheck
    report = run_gradcheck(
        seed=run.config.global_.seed,
        size=section.size,
        step=section.step,
        tolerance=section.tolerance,
        gradient_fn=_corrupted_gradient if args.corrupt_gradient else None,
    )
    verdict = "pass" if report.passed else "FAIL"
    run.log(
        f"relative error {report.relative_error:.3e} "
        f"(tolerance {report.tolerance:.0e}): {verdict}"
    )
    _emit({"command": run.command, **report.to_dict()})
    return EXIT_OK if report.passed else EXIT_NUMERICAL


def _cmd_validate(run: _Run, args: argparse.Namespace) -> int:
    report = validate(read_obj_file(args.mesh))
    for warning in report.warnings:
        run.log(warning)
    _emit({"command": run.command, **report.to_dict()})
    return EXIT_OK


def _cmd_fixture(run: _Run, args: argparse.Namespace) -> int:
    if args.kind == "disc":
        if args.vertices is None or args.boundary is None:
            raise ValueError("fixture disc needs --vertices and --boundary")
        v, f, b = disc_counts(args.vertices, args.boundary)
        if args.faces is not None and args.faces != f:
            raise ValueError(f"a disc with V={v} and B={b} has F={f} faces, not {args.faces}")
        mesh = make_disc_fixture(v, f, b)
        name = f"disc_{v}_{f}_{b}.obj"
    else:
        mesh = make_icosphere(args.icosphere_level, radius=args.radius)
        name = f"icosphere_{args.icosphere_level}.obj"
    path = run.out_dir / name
    write_obj_file(path, mesh)
    run.wrote(path)
    run.record("ok")
    _emit(
        {
            "command": run.command,
            "kind": args.kind,
            "vertex_count": mesh.vertex_count,
            "face_count": mesh.face_count,
            "outputs": run.output_names(),
        }
    )
    return EXIT_OK


def _cmd_remesh(run: _Run, args: argparse.Namespace) -> int:
    template = read_obj_file(args.template)
    target = read_obj_file(args.target)
    snapped = snap_to_surface(template, target)
    moved = np.linalg.norm(snapped.vertices - template.vertices, axis=1)
    path = run.out_dir / f"{Path(args.template).stem}_remeshed.obj"
    write_obj_file(path, snapped)
    run.wrote(path)
    run.record("ok")
    _emit(
        {
            "command": run.command,
            "vertex_count": snapped.vertex_count,
            "mean_snap_distance_mm": float(moved.mean()) if moved.size else 0.0,
            "max_snap_distance_mm": float(moved.max()) if moved.size else 0.0,
            "outputs": run.output_names(),
        }
    )
    return EXIT_OK


def _cmd_smooth(run: _Run, args: argparse.Namespace) -> int:
    mesh = read_obj_file(args.mesh)
    mask = make_smooth_mask(mesh, quantile=args.mask_quantile, rings=args.rings)
    smoothed = masked_smooth(mesh, mask, iterations=args.iterations, factor=args.factor)
    path = run.out_dir / f"{Path(args.mesh).stem}_smoothed.obj"
    write_obj_file(path, smoothed)
    run.wrote(path)
    run.record("ok")
    _emit(
        {
            "command": run.command,
            "masked_vertex_count": int(np.count_nonzero(mask)),
            "vertex_count": mesh.vertex_count,
            "outputs": run.output_names(),
        }
    )
    return EXIT_OK


Handler = Callable[[_Run, argparse.Namespace], int]

_HANDLERS: dict[str, Handler] = {
    "decompose": _cmd_decompose,
    "metrics": _cmd_metrics,
    "subdivide": _cmd_subdivide,
    "noise-sweep": _cmd_noise_sweep,
    "gradcheck": _cmd_gradcheck,
    "validate": _cmd_validate,
    "fixture": _cmd_fixture,
    "remesh": _cmd_remesh,
    "smooth": _cmd_smooth,
}

# Commands that append to <out>/events.jsonl.
_WRITES_OUTPUT = frozenset({"decompose", "subdivide", "noise-sweep", "fixture", "remesh", "smooth"})

_INPUT_ATTRIBUTES = (
    "mesh",
    "pred",
    "gt",
    "input",
    "template",
    "target",
    "pred_joints",
    "gt_joints",
)


def _common_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON run configuration")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=Path, default=None)
    common.add_argument("--allow-large", action="store_true", default=None)
    common.add_argument("--dense-ceiling", type=int, default=None)
    common.add_argument("--log-base", choices=("e", "10"), default=None, help="loss logarithm")
    common.add_argument("--msnr-log-base", choices=("e", "10"), default=None)
    common.add_argument("--cache-dir", type=Path, default=None)
    return common


def _build_arg_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog=PROG,
        description="Spectral analysis, subdivision and metrics for triangle meshes.",
    )
    parser.add_argument("--version", action="version", version=f"{PROG} {TOOL_VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()

    decompose = commands.add_parser(
        "decompose", parents=[common], help="spectrum, band energies, cumulative reconstructions"
    )
    decompose.add_argument("mesh", type=Path)
    decompose.add_argument("--spectrum", action="store_true", default=None)
    decompose.add_argument("--cuts", type=str, default=None, help="e.g. 20,40,80")
    decompose.add_argument("--bands", choices=("canonical", "auto"), default=None)

    metrics = commands.add_parser("metrics", parents=[common], help="compare two meshes")
    metrics.add_argument("pred", type=Path)
    metrics.add_argument("gt", type=Path)
    metrics.add_argument("--chamfer-mode", choices=("vertex", "surface"), default=None)
    metrics.add_argument("--weights", type=str, default=None, help="JSON loss weights")
    metrics.add_argument(
        "--level",
        nargs=2,
        type=Path,
        action="append",
        metavar=("PRED", "GT"),
        help="coarser resolution for the weighted total loss (repeat, coarsest first)",
    )
    metrics.add_argument("--pred-joints", type=Path, default=None)
    metrics.add_argument("--gt-joints", type=Path, default=None)
    metrics.add_argument("--subdivide-pred", type=int, default=None)
    metrics.add_argument("--per-frequency-csv", type=Path, default=None)

    subdivide = commands.add_parser(
        "subdivide", parents=[common], help="Loop-subdivide an OBJ mesh or a hand model JSON"
    )
    subdivide.add_argument("input", type=Path)
    subdivide.add_argument("--levels", type=int, default=None)

    sweep = commands.add_parser(
        "noise-sweep", parents=[common], help="band-limited noise sensitivity of MPVE and MSNR"
    )
    sweep.add_argument("mesh", type=Path)
    sweep.add_argument("--amplitudes", type=str, default=None, help="e.g. 0,0.1,0.2")
    sweep.add_argument("--trials", type=int, default=None)
    sweep.add_argument("--bands", choices=("canonical", "auto"), default=None)
    sweep.add_argument("--domain", choices=("spectral", "spatial"), default=None)
    sweep.add_argument("--wandb-mode", choices=("disabled", "offline", "online"), default=None)
    sweep.add_argument("--wandb-project", type=str, default=None)

    gradcheck = commands.add_parser(
        "gradcheck", parents=[common], help="finite-difference check of the loss gradient"
    )
    gradcheck.add_argument("--size", type=int, default=None)
    gradcheck.add_argument("--step", type=float, default=None)
    gradcheck.add_argument("--tolerance", type=float, default=None)
    gradcheck.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)

    check = commands.add_parser("validate", parents=[common], help="topology report for a mesh")
    check.add_argument("mesh", type=Path)

    fixture = commands.add_parser("fixture", parents=[common], help="write a generated mesh")
    fixture.add_argument("kind", choices=("disc", "icosphere"))
    fixture.add_argument("--vertices", type=int, default=None)
    fixture.add_argument("--boundary", type=int, default=None)
    fixture.add_argument("--faces", type=int, default=None)
    fixture.add_argument("--level", dest="icosphere_level", type=int, default=2)
    fixture.add_argument("--radius", type=float, default=1.0)

    remesh = commands.add_parser(
        "remesh", parents=[common], help="snap a template onto the closest target surface"
    )
    remesh.add_argument("template", type=Path)
    remesh.add_argument("target", type=Path)

    smooth = commands.add_parser(
        "smooth", parents=[common], help="masked umbrella smoothing of high-offset regions"
    )
    smooth.add_argument("mesh", type=Path)
    smooth.add_argument("--mask-quantile", type=float, default=0.9)
    smooth.add_argument("--rings", type=int, default=1)
    smooth.add_argument("--iterations", type=int, default=1)
    smooth.add_argument("--factor", type=float, default=0.5)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, dict[str, Any]]:
    overrides: dict[str, dict[str, Any]] = {
        "global": {
            "seed": args.seed,
            "dense_ceiling": args.dense_ceiling,
            "allow_large": args.allow_large,
            "loss_log_base": args.log_base,
            "msnr_log_base": args.msnr_log_base,
            "out": None if args.out is None else args.out.as_posix(),
            "cache_dir": None if args.cache_dir is None else args.cache_dir.as_posix(),
        }
    }
    if args.command == "decompose":
        overrides["decompose"] = {
            "spectrum": args.spectrum,
            "cuts": None if args.cuts is None else _parse_int_csv(args.cuts, "--cuts"),
            "bands": args.bands,
        }
    elif args.command == "metrics":
        overrides["metrics"] = {
            "chamfer_mode": args.chamfer_mode,
            "weights": (
                None if args.weights is None else _parse_json_object(args.weights, "--weights")
            ),
            "subdivide_pred": args.subdivide_pred,
        }
    elif args.command == "subdivide":
        overrides["subdivide"] = {"levels": args.levels}
    elif args.command == "noise-sweep":
        overrides["noise_sweep"] = {
            "amplitudes": (
                None
                if args.amplitudes is None
                else _parse_float_csv(args.amplitudes, "--amplitudes")
            ),
            "trials": args.trials,
            "bands": args.bands,
            "domain": args.domain,
            "wandb_mode": args.wandb_mode,
            "wandb_project": args.wandb_project,
        }
    elif args.command == "gradcheck":
        overrides["gradcheck"] = {
            "size": args.size,
            "step": args.step,
            "tolerance": args.tolerance,
        }
    return overrides


def _input_paths(args: argparse.Namespace) -> list[str]:
    paths = []
    for name in _INPUT_ATTRIBUTES:
        value = getattr(args, name, None)
        if value is not None:
            paths.append(Path(value).as_posix())
    if args.command != "metrics":
        return paths
    for pair in args.level or []:
        paths.extend(Path(item).as_posix() for item in pair)
    return paths


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, (NumericalError, ResourceLimitError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (ValueError, ValidationError)):
        return EXIT_INPUT
    return EXIT_NUMERICAL


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_arg_parser()
    args = parser.parse_args(argv)
    tag = f"[{PROG}:{args.command}]"

    run: _Run | None = None
    try:
        config = load_run_config(args.config, _overrides(args))
        run = _Run(command=args.command, config=config, inputs=_input_paths(args))
        return _HANDLERS[args.command](run, args)
    except (OSError, ValueError, RuntimeError) as exc:
        code = _exit_code(exc)
        print(f"{tag} error: {exc}", file=sys.stderr)
        if run is not None and args.command in _WRITES_OUTPUT and run.out_dir.is_dir():
            try:
                run.record(f"error:{code}")
            except OSError:
                pass
        return code


if __name__ == "__main__":
    raise SystemExit(main())
