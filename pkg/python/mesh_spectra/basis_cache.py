"""On-disk cache of full spectral bases keyed by the Laplacian content hash."""

from __future__ import annotations

import os
import threading
import time
from collections.abc import Callable, Iterator, Mapping
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .constants import BASIS_CACHE_SCHEMA_VERSION, DENSE_CEILING
from .eigensolvers import eigendecompose_dense
from .graph_spectral import BASIS_MODE_FULL, LaplacianMatrix, SpectralBasis, build_laplacian
from .mesh_core import TriangleMesh, build_graph

CACHE_ENV_VAR = "MESHSPECTRA_CACHE"
DEFAULT_CACHE_DIRNAME = ".basis_cache"
DEFAULT_LOCK_TIMEOUT_SECONDS = 600.0


def save_basis(path: Path, basis: SpectralBasis) -> Path:
    """Write a versioned .npz dump; the rename makes a partially written file invisible."""
    if basis.laplacian_hash is None:
        raise ValueError("a cached basis must carry the hash of its Laplacian")
    path.parent.mkdir(parents=True, exist_ok=True)
    staging = path.with_name(path.name + ".tmp")
    with staging.open("wb") as handle:
        np.savez(
            handle,
            schema_version=np.asarray(BASIS_CACHE_SCHEMA_VERSION, dtype=np.int64),
            mode=np.asarray(basis.mode),
            laplacian_hash=np.asarray(basis.laplacian_hash),
            eigenvalues=np.ascontiguousarray(basis.eigenvalues, dtype="<f8"),
            eigenvectors=np.ascontiguousarray(basis.eigenvectors, dtype="<f8"),
        )
    os.replace(staging, path)
    return path


def load_basis(path: Path, expected_hash: str | None = None) -> SpectralBasis:
    if not path.exists():
        raise FileNotFoundError(f"basis cache file not found: {path}")
    with np.load(path, allow_pickle=False) as payload:
        missing = {"schema_version", "mode", "laplacian_hash", "eigenvalues", "eigenvectors"}
        missing -= set(payload.files)
        if missing:
            raise ValueError(f"basis cache {path} lacks fields {sorted(missing)}")
        schema = int(payload["schema_version"])
        if schema != BASIS_CACHE_SCHEMA_VERSION:
            raise ValueError(
                f"basis cache {path} has schema {schema}, expected {BASIS_CACHE_SCHEMA_VERSION}"
            )
        stored_hash = str(payload["laplacian_hash"])
        if expected_hash is not None and stored_hash != expected_hash:
            raise ValueError(
                f"basis cache {path} was computed for Laplacian {stored_hash[:16]}, "
                f"expected {expected_hash[:16]}"
            )
        return SpectralBasis(
            eigenvalues=payload["eigenvalues"],
            eigenvectors=payload["eigenvectors"],
            mode=str(payload["mode"]),
            laplacian_hash=stored_hash,
        )


def cache_file_name(laplacian_hash: str) -> str:
    return f"basis-{laplacian_hash[:16]}.npz"


def resolve_cache_dir(
    out_dir: Path | None,
    configured: Path | None = None,
    env: Mapping[str, str] | None = None,
) -> Path | None:
    """Environment variable first, then an explicit setting, then `<out>/.basis_cache`."""
    source = os.environ if env is None else env
    raw = source.get(CACHE_ENV_VAR, "").strip()
    if raw:
        return Path(raw)
    if configured is not None:
        return Path(configured)
    if out_dir is not None:
        return Path(out_dir) / DEFAULT_CACHE_DIRNAME
    return None


@contextmanager
def file_lock(
    path: Path,
    *,
    timeout_seconds: float = DEFAULT_LOCK_TIMEOUT_SECONDS,
    poll_seconds: float = 0.05,
) -> Iterator[Path]:
    """Exclusive lock held through an O_EXCL lock file next to the cached entry."""
    path.parent.mkdir(parents=True, exist_ok=True)
    deadline = time.monotonic() + max(0.0, float(timeout_seconds))
    while True:
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            if time.monotonic() >= deadline:
                raise RuntimeError(
                    f"timed out waiting for lock {path}; remove it if no other process "
                    "is computing this basis"
                ) from None
            time.sleep(poll_seconds)
            continue
        break
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield path
    finally:
        path.unlink(missing_ok=True)


@dataclass(frozen=True)
class CacheStats:
    hits: int
    misses: int
    writes: int

    def to_dict(self) -> dict[str, Any]:
        return {"hits": self.hits, "misses": self.misses, "writes": self.writes}


class BasisCache:
    """Directory of full bases; safe to share between threads and processes."""

    def __init__(self, directory: Path) -> None:
        self.directory = Path(directory)
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0
        self._writes = 0

    def path_for(self, laplacian_hash: str) -> Path:
        return self.directory / cache_file_name(laplacian_hash)

    def get_or_compute(
        self,
        laplacian: LaplacianMatrix,
        compute: Callable[[LaplacianMatrix], SpectralBasis],
    ) -> SpectralBasis:
        laplacian_hash = laplacian.content_hash()
        target = self.path_for(laplacian_hash)
        with self._lock, file_lock(target.with_name(target.name + ".lock")):
            if target.exists():
                self._hits += 1
                return load_basis(target, expected_hash=laplacian_hash)
            self._misses += 1
            basis = compute(laplacian)
            if basis.mode != BASIS_MODE_FULL:
                return basis
            save_basis(target, basis)
            self._writes += 1
            return basis

    def stats(self) -> CacheStats:
        with self._lock:
            return CacheStats(hits=self._hits, misses=self._misses, writes=self._writes)


def full_basis(
    mesh: TriangleMesh,
    *,
    dense_ceiling: int = DENSE_CEILING,
    allow_large: bool = False,
    cache_dir: Path | None = None,
) -> SpectralBasis:
    """Mesh -> graph -> Laplacian -> dense basis, reused from `cache_dir` when present."""
    laplacian = build_laplacian(build_graph(mesh))

    def _compute(matrix: LaplacianMatrix) -> SpectralBasis:
        return eigendecompose_dense(matrix, dense_ceiling=dense_ceiling, allow_large=allow_large)

    if cache_dir is None:
        return _compute(laplacian)
    return BasisCache(cache_dir).get_or_compute(laplacian, _compute)
