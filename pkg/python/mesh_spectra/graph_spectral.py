"""Graph Laplacian, spectral basis types and the graph Fourier transform on meshes.

The basis convention is L = U diag(lambda) U^T with eigenvectors stored as columns, so
the forward transform of an N x d vertex signal x is U^T x and the inverse is U c.
Eigensolvers live in `eigensolvers.py`.
"""

from __future__ import annotations

import csv
import hashlib
import io
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .constants import PROFILE_LOG_FLOOR
from .mesh_core import MeshGraph

BASIS_MODE_FULL = "full"
BASIS_MODE_PARTIAL = "partial"

SPECTRUM_CSV_HEADER = ("freq_index", "eigenvalue", "amplitude_mm", "log10_amplitude")


@dataclass(frozen=True, eq=False)
class LaplacianMatrix:
    """Combinatorial Laplacian D - A with unit edge weights, canonical CSR storage."""

    matrix: sp.csr_matrix

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[0])

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.asarray(self.matrix.shape, dtype="<i8").tobytes())
        digest.update(np.asarray(self.matrix.indptr, dtype="<i8").tobytes())
        digest.update(np.asarray(self.matrix.indices, dtype="<i8").tobytes())
        digest.update(np.asarray(self.matrix.data, dtype="<f8").tobytes())
        return digest.hexdigest()


def build_laplacian(graph: MeshGraph) -> LaplacianMatrix:
    n = graph.vertex_count
    adjacency = graph.adjacency()
    degree = sp.diags(np.asarray(adjacency.sum(axis=1)).reshape(-1), format="csr")
    laplacian = (degree - adjacency).tocsr()
    laplacian.eliminate_zeros()
    laplacian.sum_duplicates()
    laplacian.sort_indices()
    return LaplacianMatrix(matrix=sp.csr_matrix(laplacian, shape=(n, n), dtype=np.float64))


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Ascending eigenvalues with paired orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mode: str = BASIS_MODE_FULL
    laplacian_hash: str | None = None

    def __post_init__(self) -> None:
        values = np.array(self.eigenvalues, dtype=np.float64, copy=True).reshape(-1)
        # One memory layout whether the basis was just solved or loaded from a cache file.
        vectors = np.ascontiguousarray(np.array(self.eigenvectors, dtype=np.float64, copy=True))
        if vectors.ndim != 2 or vectors.shape[1] != values.shape[0]:
            raise ValueError(
                f"eigenvectors shape {vectors.shape} does not pair with "
                f"{values.shape[0]} eigenvalues"
            )
        if self.mode not in (BASIS_MODE_FULL, BASIS_MODE_PARTIAL):
            raise ValueError(f"unknown basis mode {self.mode!r}")
        if self.mode == BASIS_MODE_FULL and vectors.shape[0] != vectors.shape[1]:
            raise ValueError("a full basis must be square")
        if values.shape[0] > 1 and np.any(np.diff(values) < 0.0):
            raise ValueError("eigenvalues must be non-decreasing")
        values.setflags(write=False)
        vectors.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)
        object.__setattr__(self, "eigenvectors", vectors)

    @property
    def dimension(self) -> int:
        return int(self.eigenvectors.shape[0])

    @property
    def size(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def is_full(self) -> bool:
        return self.mode == BASIS_MODE_FULL

    def describe_mode(self) -> str:
        return BASIS_MODE_FULL if self.is_full else f"{BASIS_MODE_PARTIAL}({self.size})"

    def require_full(self, operation: str) -> None:
        if not self.is_full:
            raise ValueError(
                f"{operation} needs the full spectrum, got a {self.describe_mode()} basis"
            )


@dataclass(frozen=True, eq=False)
class SpectralCoefficients:
    """Row f holds U_f^T x for every signal column (millimetres)."""

    coefficients: np.ndarray

    @property
    def size(self) -> int:
        return int(self.coefficients.shape[0])


@dataclass(frozen=True)
class Band:
    """Inclusive frequency index range [lo, hi]."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if int(self.lo) < 0 or int(self.hi) < int(self.lo):
            raise ValueError(f"invalid band [{self.lo},{self.hi}]")
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "hi", int(self.hi))

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1

    @property
    def label(self) -> str:
        return f"[{self.lo},{self.hi}]"

    def as_slice(self) -> slice:
        return slice(self.lo, self.hi + 1)

    def check_within(self, basis_size: int) -> None:
        if self.hi >= int(basis_size):
            raise ValueError(f"band {self.label} exceeds basis size {basis_size}")


def basis_diagnostics(laplacian: LaplacianMatrix, basis: SpectralBasis) -> dict[str, float]:
    """Orthonormality and eigenpair residual figures for a computed basis."""
    vectors = basis.eigenvectors
    gram = vectors.T @ vectors
    orthonormality = float(np.max(np.abs(gram - np.eye(basis.size)))) if basis.size else 0.0
    residual = laplacian.matrix @ vectors - vectors * basis.eigenvalues
    residual_norms = np.linalg.norm(residual, axis=0)
    lam_max = float(np.max(np.abs(basis.eigenvalues))) if basis.size else 0.0
    return {
        "orthonormality_error": orthonormality,
        "max_residual": float(residual_norms.max()) if basis.size else 0.0,
        "residual_scale": max(1.0, lam_max),
        "min_eigenvalue": float(basis.eigenvalues.min()) if basis.size else 0.0,
    }


def _as_signal(signal: np.ndarray, rows: int) -> np.ndarray:
    values = np.asarray(signal, dtype=np.float64)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if values.ndim != 2 or values.shape[0] != rows:
        raise ValueError(f"signal shape {values.shape} does not match graph size {rows}")
    return values


def gft(basis: SpectralBasis, signal: np.ndarray) -> SpectralCoefficients:
    values = _as_signal(signal, basis.dimension)
    return SpectralCoefficients(coefficients=basis.eigenvectors.T @ values)


def igft(basis: SpectralBasis, coeffs: SpectralCoefficients) -> np.ndarray:
    coefficients = np.asarray(coeffs.coefficients, dtype=np.float64)
    if coefficients.ndim == 1:
        coefficients = coefficients.reshape(-1, 1)
    if coefficients.shape[0] != basis.size:
        raise ValueError(
            f"{coefficients.shape[0]} coefficient rows do not match basis size {basis.size}"
        )
    return basis.eigenvectors @ coefficients


def band_component(basis: SpectralBasis, signal: np.ndarray, band: Band) -> np.ndarray:
    """Sum over f in band of U_f (U_f^T x)."""
    band.check_within(basis.size)
    values = _as_signal(signal, basis.dimension)
    block = basis.eigenvectors[:, band.as_slice()]
    return block @ (block.T @ values)


def _check_cuts(cuts: Sequence[int], basis_size: int) -> list[int]:
    normalized = [int(cut) for cut in cuts]
    if not normalized:
        raise ValueError("at least one cut is required")
    if normalized[0] < 0:
        raise ValueError("cuts must be non-negative")
    if any(b <= a for a, b in zip(normalized, normalized[1:], strict=False)):
        raise ValueError(f"cuts must be strictly ascending, got {normalized}")
    if normalized[-1] >= basis_size:
        raise ValueError(f"last cut {normalized[-1]} exceeds basis size {basis_size}")
    return normalized


def cumulative_reconstruction(
    basis: SpectralBasis, signal: np.ndarray, cuts: Sequence[int]
) -> list[np.ndarray]:
    """Entry j is the band component over [0, cuts[j]]."""
    normalized = _check_cuts(cuts, basis.size)
    values = _as_signal(signal, basis.dimension)
    coefficients = basis.eigenvectors.T @ values
    return [
        basis.eigenvectors[:, : cut + 1] @ coefficients[: cut + 1] for cut in normalized
    ]


def cumulative_residuals(
    basis: SpectralBasis, signal: np.ndarray, cuts: Sequence[int]
) -> np.ndarray:
    """Frobenius norm of x minus each cumulative reconstruction, from the spectral tail.

    With a full basis this equals the spatial residual by Parseval, and the tail sums make
    the sequence exactly non-increasing in floating point.
    """
    basis.require_full("cumulative_residuals")
    normalized = _check_cuts(cuts, basis.size)
    values = _as_signal(signal, basis.dimension)
    energy = np.sum((basis.eigenvectors.T @ values) ** 2, axis=1)
    tail = np.append(np.cumsum(energy[::-1])[::-1], 0.0)
    return np.sqrt(tail[[cut + 1 for cut in normalized]])


@dataclass(frozen=True, eq=False)
class SpectrumProfile:
    freq_index: np.ndarray
    eigenvalue: np.ndarray
    amplitude_mm: np.ndarray
    log10_amplitude: np.ndarray

    def rows(self) -> list[tuple[int, float, float, float]]:
        return [
            (int(f), float(lam), float(amp), float(log_amp))
            for f, lam, amp, log_amp in zip(
                self.freq_index,
                self.eigenvalue,
                self.amplitude_mm,
                self.log10_amplitude,
                strict=True,
            )
        ]

    def to_csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(SPECTRUM_CSV_HEADER)
        for f, lam, amp, log_amp in self.rows():
            writer.writerow([f, repr(lam), repr(amp), repr(log_amp)])
        return buffer.getvalue()

    def write_csv(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv_text(), encoding="utf-8")


def spectrum_profile(basis: SpectralBasis, signal: np.ndarray) -> SpectrumProfile:
    basis.require_full("spectrum_profile")
    coefficients = gft(basis, signal).coefficients
    amplitude = np.linalg.norm(coefficients, axis=1)
    return SpectrumProfile(
        freq_index=np.arange(basis.size, dtype=np.int64),
        eigenvalue=basis.eigenvalues.copy(),
        amplitude_mm=amplitude,
        log10_amplitude=np.log10(amplitude + PROFILE_LOG_FLOOR),
    )


def decile_log_amplitudes(profile: SpectrumProfile) -> tuple[float, float]:
    """Mean log10 amplitude of the lowest and the highest tenth of frequencies."""
    count = profile.log10_amplitude.shape[0]
    width = max(1, count // 10)
    return (
        float(np.mean(profile.log10_amplitude[:width])),
        float(np.mean(profile.log10_amplitude[-width:])),
    )
