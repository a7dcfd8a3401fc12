"""Experiment harnesses: octave bands, band-limited noise, the metric sensitivity sweep,
spectrum and cumulative-reconstruction exports, and provenance sidecars."""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .constants import (
    CANONICAL_BAND_STARTS,
    CANONICAL_BASIS_SIZE,
    DEFAULT_NOISE_AMPLITUDE_COUNT,
    DEFAULT_NOISE_MAX_AMPLITUDE,
    TOOL_VERSION,
)
from .graph_spectral import (
    Band,
    SpectralBasis,
    SpectralCoefficients,
    cumulative_reconstruction,
    cumulative_residuals,
    gft,
    spectrum_profile,
)
from .metrics_losses import msnr, per_vertex_error
from .mesh_core import TriangleMesh
from .obj_io import write_obj_file

NOISE_DOMAIN_SPECTRAL = "spectral"
NOISE_DOMAIN_SPATIAL = "spatial"
NOISE_DOMAINS = (NOISE_DOMAIN_SPECTRAL, NOISE_DOMAIN_SPATIAL)

BAND_MODE_CANONICAL = "canonical"
BAND_MODE_AUTO = "auto"

SWEEP_CSV_HEADER = (
    "band_lo",
    "band_hi",
    "max_amplitude_mm",
    "trials",
    "mean_mpve_mm",
    "mean_msnr",
)
CUMULATIVE_CSV_HEADER = ("cut", "residual_frobenius_mm")
BAND_ENERGY_CSV_HEADER = ("band_lo", "band_hi", "energy_mm2", "energy_fraction")
SPECTRUM_FILE_NAME = "spectrum.csv"
SWEEP_FILE_NAME = "noise_sweep.csv"
SWEEP_SUMMARY_FILE_NAME = "sweep_summary.json"
CUMULATIVE_FILE_NAME = "cumulative_residuals.csv"
BAND_ENERGY_FILE_NAME = "band_energy.csv"
PROVENANCE_FILE_NAME = "provenance.json"

_MIN_OCTAVE_BASIS = 2 * CANONICAL_BAND_STARTS[0]


@dataclass(frozen=True)
class OctaveBands:
    bands: tuple[Band, ...]
    canonical: bool

    def __iter__(self) -> Iterator[Band]:
        return iter(self.bands)

    def __len__(self) -> int:
        return len(self.bands)

    def __getitem__(self, index: int) -> Band:
        return self.bands[index]


def make_octave_bands(basis_size: int) -> OctaveBands:
    """Eight doubling bands; rescaled to the basis and flagged non-canonical below 12337."""
    size = int(basis_size)
    if size < _MIN_OCTAVE_BASIS:
        raise ValueError(f"octave bands need a basis of at least {_MIN_OCTAVE_BASIS}, got {size}")

    if size >= CANONICAL_BASIS_SIZE:
        starts = list(CANONICAL_BAND_STARTS)
        last = CANONICAL_BASIS_SIZE - 1
        canonical = True
    else:
        scale = size / float(CANONICAL_BASIS_SIZE)
        starts = []
        for start in CANONICAL_BAND_STARTS:
            scaled = int(np.floor(start * scale + 0.5))
            if starts and scaled <= starts[-1]:
                scaled = starts[-1] + 1
            starts.append(scaled)
        last = size - 1
        canonical = False

    ends = [start - 1 for start in starts[1:]] + [last]
    return OctaveBands(
        bands=tuple(Band(lo, hi) for lo, hi in zip(starts, ends, strict=True)),
        canonical=canonical,
    )


def select_bands(basis_size: int, mode: str) -> OctaveBands:
    """`canonical` insists on the full-size band set; `auto` rescales for smaller meshes."""
    if mode not in (BAND_MODE_CANONICAL, BAND_MODE_AUTO):
        raise ValueError(f"unknown band mode {mode!r}")
    bands = make_octave_bands(basis_size)
    if mode == BAND_MODE_CANONICAL and not bands.canonical:
        raise ValueError(
            f"canonical bands need at least {CANONICAL_BASIS_SIZE} frequencies, the mesh has "
            f"{basis_size}; use --bands auto or subdivide the mesh first"
        )
    return bands


def default_amplitudes(
    max_amplitude: float = DEFAULT_NOISE_MAX_AMPLITUDE,
    count: int = DEFAULT_NOISE_AMPLITUDE_COUNT,
) -> tuple[float, ...]:
    return tuple(float(a) for a in np.linspace(0.0, float(max_amplitude), int(count)))


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform noise in [-max_amplitude, +max_amplitude] per coefficient and axis of a band."""

    band: Band
    max_amplitude: float
    seed: int = 0
    domain: str = NOISE_DOMAIN_SPECTRAL

    def __post_init__(self) -> None:
        if not float(self.max_amplitude) >= 0.0:
            raise ValueError(f"max_amplitude must be non-negative, got {self.max_amplitude}")
        if self.domain not in NOISE_DOMAINS:
            raise ValueError(
                f"unknown noise domain {self.domain!r}; expected one of {NOISE_DOMAINS}"
            )
        object.__setattr__(self, "max_amplitude", float(self.max_amplitude))


def band_noise_coefficients(
    coeffs: SpectralCoefficients, spec: NoiseSpec, rng: np.random.Generator
) -> SpectralCoefficients:
    """Copy of `coeffs` with uniform noise added to the rows of the band only."""
    values = np.array(coeffs.coefficients, dtype=np.float64, copy=True)
    spec.band.check_within(values.shape[0])
    if spec.max_amplitude > 0.0:
        a = spec.max_amplitude
        shape = (spec.band.width, values.shape[1])
        values[spec.band.as_slice()] += rng.uniform(-a, a, size=shape)
    return SpectralCoefficients(coefficients=values)


def inject_band_noise(
    basis: SpectralBasis,
    mesh: TriangleMesh,
    spec: NoiseSpec,
    rng: np.random.Generator | None = None,
) -> TriangleMesh:
    """Displace the mesh by band-limited noise; connectivity is kept.

    Spectral noise adds U_b delta, the inverse transform of the coefficient perturbation,
    directly to the vertices. Spatial noise draws per-vertex uniform offsets and keeps only
    their projection onto the band.
    """
    if basis.dimension != mesh.vertex_count:
        raise ValueError(
            f"basis dimension {basis.dimension} does not match mesh size {mesh.vertex_count}"
        )
    spec.band.check_within(basis.size)
    generator = np.random.default_rng(spec.seed) if rng is None else rng
    vertices = np.array(mesh.vertices, copy=True)
    a = spec.max_amplitude
    if a == 0.0:
        return mesh.with_vertices(vertices)

    block = basis.eigenvectors[:, spec.band.as_slice()]
    if spec.domain == NOISE_DOMAIN_SPECTRAL:
        silent = SpectralCoefficients(coefficients=np.zeros((basis.size, vertices.shape[1])))
        delta = band_noise_coefficients(silent, spec, generator).coefficients
        displacement = block @ delta[spec.band.as_slice()]
    else:
        raw = generator.uniform(-a, a, size=vertices.shape)
        displacement = block @ (block.T @ raw)
    return mesh.with_vertices(vertices + displacement)


def cell_rng(seed: int, band_index: int, amplitude_index: int, trial: int) -> np.random.Generator:
    """Independent stream per sweep cell and trial."""
    return np.random.default_rng([int(seed), int(band_index), int(amplitude_index), int(trial)])


@dataclass(frozen=True)
class SweepRow:
    band_lo: int
    band_hi: int
    max_amplitude_mm: float
    trials: int
    mean_mpve_mm: float
    mean_msnr: float

    def as_csv_row(self) -> list[Any]:
        return [
            self.band_lo,
            self.band_hi,
            repr(self.max_amplitude_mm),
            self.trials,
            repr(self.mean_mpve_mm),
            repr(self.mean_msnr),
        ]


@dataclass(frozen=True)
class BandSensitivity:
    band_lo: int
    band_hi: int
    mpve_slope: float
    msnr_slope: float
    msnr_drop_at_max: float
    msnr_inversions: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "band_lo": self.band_lo,
            "band_hi": self.band_hi,
            "mpve_slope_per_mm": self.mpve_slope,
            "msnr_slope_per_mm": self.msnr_slope,
            "msnr_drop_at_max": self.msnr_drop_at_max,
            "msnr_inversions": self.msnr_inversions,
        }


@dataclass(frozen=True)
class NoiseSweepReport:
    rows: tuple[SweepRow, ...]
    seed: int
    mesh_hash: str
    trials: int
    domain: str
    canonical_bands: bool

    def to_csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(SWEEP_CSV_HEADER)
        for row in self.rows:
            writer.writerow(row.as_csv_row())
        return buffer.getvalue()

    def write_csv(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv_text(), encoding="utf-8")
        return path

    def band_rows(self) -> dict[tuple[int, int], list[SweepRow]]:
        grouped: dict[tuple[int, int], list[SweepRow]] = {}
        for row in self.rows:
            grouped.setdefault((row.band_lo, row.band_hi), []).append(row)
        return grouped

    def sensitivity(self) -> list[BandSensitivity]:
        """Per band: least-squares slopes against amplitude and the MSNR lost at the largest."""
        summary: list[BandSensitivity] = []
        for (lo, hi), rows in self.band_rows().items():
            ordered = sorted(rows, key=lambda r: r.max_amplitude_mm)
            amplitudes = np.asarray([r.max_amplitude_mm for r in ordered])
            mpve = np.asarray([r.mean_mpve_mm for r in ordered])
            scores = np.asarray([r.mean_msnr for r in ordered])
            if amplitudes.shape[0] > 1 and np.ptp(amplitudes) > 0.0:
                mpve_slope = float(np.polyfit(amplitudes, mpve, 1)[0])
                msnr_slope = float(np.polyfit(amplitudes, scores, 1)[0])
            else:
                mpve_slope = msnr_slope = 0.0
            summary.append(
                BandSensitivity(
                    band_lo=lo,
                    band_hi=hi,
                    mpve_slope=mpve_slope,
                    msnr_slope=msnr_slope,
                    msnr_drop_at_max=float(scores[0] - scores[-1]),
                    msnr_inversions=int(np.count_nonzero(np.diff(scores) > 0.0)),
                )
            )
        return summary

    def summary_dict(self) -> dict[str, Any]:
        return {
            "tool_version": TOOL_VERSION,
            "seed": self.seed,
            "mesh_hash": self.mesh_hash,
            "trials": self.trials,
            "domain": self.domain,
            "canonical_bands": self.canonical_bands,
            "bands": [item.to_dict() for item in self.sensitivity()],
        }


CellCallback = Callable[[int, int, SweepRow], None]


def run_noise_sweep(
    mesh: TriangleMesh,
    bands: Sequence[Band],
    amplitudes: Sequence[float],
    trials: int,
    seed: int,
    *,
    basis: SpectralBasis,
    domain: str = NOISE_DOMAIN_SPECTRAL,
    on_cell: CellCallback | None = None,
) -> NoiseSweepReport:
    """Average MPVE and MSNR over `trials` noisy copies for every (band, amplitude) cell.

    Rows come out band-major in the given order. `on_cell(band_index, amplitude_index, row)`
    is called after each cell.
    """
    basis.require_full("run_noise_sweep")
    if int(trials) < 1:
        raise ValueError("trials must be at least 1")
    if not bands:
        raise ValueError("at least one band is required")
    if not amplitudes:
        raise ValueError("at least one amplitude is required")

    gt = mesh.vertices
    rows: list[SweepRow] = []
    for band_index, band in enumerate(bands):
        band.check_within(basis.size)
        for amplitude_index, amplitude in enumerate(amplitudes):
            spec = NoiseSpec(band=band, max_amplitude=amplitude, seed=seed, domain=domain)
            mpve_values = np.empty(int(trials))
            msnr_values = np.empty(int(trials))
            for trial in range(int(trials)):
                noisy = inject_band_noise(
                    basis, mesh, spec, rng=cell_rng(seed, band_index, amplitude_index, trial)
                )
                mpve_values[trial] = per_vertex_error(noisy.vertices, gt)
                msnr_values[trial] = msnr(basis, noisy.vertices, gt).mean
            row = SweepRow(
                band_lo=band.lo,
                band_hi=band.hi,
                max_amplitude_mm=float(amplitude),
                trials=int(trials),
                mean_mpve_mm=float(np.mean(mpve_values)),
                mean_msnr=float(np.mean(msnr_values)),
            )
            rows.append(row)
            if on_cell is not None:
                on_cell(band_index, amplitude_index, row)

    canonical = bool(getattr(bands, "canonical", False))
    return NoiseSweepReport(
        rows=tuple(rows),
        seed=int(seed),
        mesh_hash=mesh.content_hash(),
        trials=int(trials),
        domain=domain,
        canonical_bands=canonical,
    )


def export_spectrum(mesh: TriangleMesh, basis: SpectralBasis, path: Path) -> Path:
    spectrum_profile(basis, mesh.vertices).write_csv(path)
    return path


def band_energies(
    basis: SpectralBasis, signal: np.ndarray, bands: Sequence[Band]
) -> list[tuple[int, int, float, float]]:
    """Squared coefficient norm per band and its share of the total signal energy."""
    basis.require_full("band_energies")
    coeffs = gft(basis, signal).coefficients
    per_frequency = np.sum(coeffs**2, axis=1)
    total = float(np.sum(per_frequency))
    rows: list[tuple[int, int, float, float]] = []
    for band in bands:
        band.check_within(basis.size)
        energy = float(np.sum(per_frequency[band.as_slice()]))
        rows.append((band.lo, band.hi, energy, energy / total if total > 0.0 else 0.0))
    return rows


def export_band_energies(
    mesh: TriangleMesh, basis: SpectralBasis, bands: Sequence[Band], path: Path
) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(BAND_ENERGY_CSV_HEADER)
    for lo, hi, energy, fraction in band_energies(basis, mesh.vertices, bands):
        writer.writerow([lo, hi, repr(energy), repr(fraction)])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buffer.getvalue(), encoding="utf-8")
    return path


@dataclass(frozen=True)
class CumulativeSeries:
    obj_paths: tuple[Path, ...]
    csv_path: Path
    residuals: tuple[float, ...]


def cumulative_obj_name(cut: int) -> str:
    return f"cumulative_{int(cut):05d}.obj"


def export_cumulative_series(
    mesh: TriangleMesh, basis: SpectralBasis, cuts: Sequence[int], out_dir: Path
) -> CumulativeSeries:
    reconstructions = cumulative_reconstruction(basis, mesh.vertices, cuts)
    residuals = cumulative_residuals(basis, mesh.vertices, cuts)

    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    for cut, vertices in zip(cuts, reconstructions, strict=True):
        path = out_dir / cumulative_obj_name(cut)
        write_obj_file(path, mesh.with_vertices(vertices))
        paths.append(path)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CUMULATIVE_CSV_HEADER)
    for cut, residual in zip(cuts, residuals.tolist(), strict=True):
        writer.writerow([int(cut), repr(float(residual))])
    csv_path = out_dir / CUMULATIVE_FILE_NAME
    csv_path.write_text(buffer.getvalue(), encoding="utf-8")

    return CumulativeSeries(
        obj_paths=tuple(paths),
        csv_path=csv_path,
        residuals=tuple(float(r) for r in residuals),
    )


def write_provenance(
    out_dir: Path,
    mesh: TriangleMesh,
    seed: int | None,
    extra: dict[str, Any] | None = None,
) -> Path:
    payload: dict[str, Any] = {
        "tool_version": TOOL_VERSION,
        "mesh_hash": mesh.content_hash(),
        "seed": None if seed is None else int(seed),
        "vertex_count": mesh.vertex_count,
        "face_count": mesh.face_count,
    }
    payload.update(extra or {})
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / PROVENANCE_FILE_NAME
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
