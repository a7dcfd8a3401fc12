"""Symmetric eigensolvers for mesh Laplacians.

`eigendecompose_dense` returns every eigenpair through LAPACK and is bounded by a size
ceiling. `eigendecompose_partial` returns the k smallest pairs with a shift-invert block
Krylov iteration that keeps its basis fully reorthogonalized.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .constants import DENSE_CEILING
from .errors import NumericalError, ResourceLimitError
from .graph_spectral import (
    BASIS_MODE_FULL,
    BASIS_MODE_PARTIAL,
    LaplacianMatrix,
    SpectralBasis,
)

# Relative singular value below which a new Krylov direction is treated as dependent.
_DEFLATION_TOLERANCE = 1.0e-8

# Relative distance below the largest Ritz value at which missing eigenvalues are counted.
_INERTIA_GAP = 1.0e-7
_INERTIA_ATTEMPTS = 3


def estimate_dense_memory_bytes(dimension: int) -> int:
    """Working set of a dense solve: the matrix, the eigenvectors and LAPACK workspace."""
    n = int(dimension)
    return 3 * 8 * n * n


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so that its entry of largest magnitude is positive.

    np.argmax returns the first maximum, so ties resolve to the lowest row index.
    """
    if vectors.shape[1] == 0:
        return vectors.copy()
    columns = np.arange(vectors.shape[1])
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, columns])
    signs[signs == 0.0] = 1.0
    return vectors * signs


def _ordered(values: np.ndarray, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(values, kind="stable")
    return values[order], fix_signs(vectors[:, order])


def eigendecompose_dense(
    laplacian: LaplacianMatrix,
    *,
    dense_ceiling: int = DENSE_CEILING,
    allow_large: bool = False,
) -> SpectralBasis:
    n = laplacian.dimension
    if n == 0:
        raise ValueError("cannot decompose an empty Laplacian")
    if n > int(dense_ceiling) and not allow_large:
        gib = estimate_dense_memory_bytes(n) / float(1 << 30)
        raise ResourceLimitError(
            f"dense eigendecomposition of {n} vertices needs about {gib:.2f} GiB and exceeds "
            f"the ceiling of {dense_ceiling} vertices; pass allow_large to override"
        )

    values, vectors = scipy.linalg.eigh(laplacian.toarray())
    values, vectors = _ordered(values, vectors)
    return SpectralBasis(
        eigenvalues=values,
        eigenvectors=vectors,
        mode=BASIS_MODE_FULL,
        laplacian_hash=laplacian.content_hash(),
    )


def _orthonormalize(block: np.ndarray, basis: np.ndarray | None) -> np.ndarray:
    """Orthonormal columns spanning `block` minus its projection onto `basis`.

    Classical Gram-Schmidt is applied twice, dependent directions are dropped through an
    SVD, and a final projection plus QR restores orthogonality lost by small singular
    values.
    """
    scale = float(np.max(np.linalg.norm(block, axis=0))) if block.size else 0.0
    if scale == 0.0:
        return block[:, :0]
    work = block
    for _ in range(2):
        if basis is not None and basis.shape[1]:
            work = work - basis @ (basis.T @ work)
    left, singular, _ = np.linalg.svd(work, full_matrices=False)
    keep = singular > _DEFLATION_TOLERANCE * scale
    directions = left[:, keep]
    if directions.shape[1] == 0:
        return directions
    if basis is not None and basis.shape[1]:
        directions = directions - basis @ (basis.T @ directions)
    directions, _ = np.linalg.qr(directions)
    return directions


def _rayleigh_ritz(
    basis: np.ndarray, image: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    projected = basis.T @ image
    projected = 0.5 * (projected + projected.T)
    theta, weights = scipy.linalg.eigh(projected)
    theta = theta[:k]
    ritz = basis @ weights[:, :k]
    residual = image @ weights[:, :k] - ritz * theta
    return theta, ritz, np.linalg.norm(residual, axis=0)


def _count_below(matrix: sp.csr_matrix, sigma: float) -> int | None:
    """Eigenvalues of `matrix` below `sigma` by Sylvester's law of inertia.

    The factorization is forced onto diagonal pivots with a symmetric ordering, so
    P (A - sigma I) P^T = L D L^T and the negative entries of D count the eigenvalues.
    Returns None when SuperLU had to leave the diagonal or hit an exact zero pivot.
    """
    n = matrix.shape[0]
    shifted = (matrix - float(sigma) * sp.identity(n, format="csr")).tocsc()
    try:
        factor = splu(
            shifted,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError:
        return None
    if not np.array_equal(factor.perm_r, factor.perm_c):
        return None
    return int(np.count_nonzero(factor.U.diagonal() < 0.0))


def _spectrum_is_complete(matrix: sp.csr_matrix, theta: np.ndarray) -> bool:
    """True when no eigenvalue below the largest Ritz value is missing from `theta`."""
    top = float(theta[-1])
    gap = _INERTIA_GAP * max(1.0, abs(top))
    sigma = top - gap
    for _ in range(_INERTIA_ATTEMPTS):
        count = _count_below(matrix, sigma)
        if count is not None:
            return count == int(np.count_nonzero(theta < sigma))
        sigma -= gap
    return False


def eigendecompose_partial(
    laplacian: LaplacianMatrix,
    k: int,
    seed: int = 0,
    *,
    block_size: int = 8,
    shift: float = -1.0,
    tolerance: float = 1.0e-10,
    max_iterations: int | None = None,
) -> SpectralBasis:
    """The k algebraically smallest eigenpairs.

    Each step solves (L - shift I) Y = X for the newest block with a sparse LU factor,
    appends the reorthogonalized result to the Krylov basis and extracts Ritz pairs. Once
    every one of the k Ritz residuals is below tolerance * max(1, Gershgorin bound), an
    inertia count checks that no smaller eigenvalue was skipped. If one was, fresh random
    directions join the basis and the iteration continues. The basis grows every step and
    is exact at full dimension, so the default iteration cap always ends in an answer.
    """
    n = laplacian.dimension
    k = int(k)
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < {n}, got {k}")
    if shift >= 0.0:
        raise ValueError("shift must be negative so that L - shift I is positive definite")

    matrix = laplacian.matrix
    diagonal = matrix.diagonal()
    lam_bound = max(1.0, 2.0 * float(diagonal.max()) if diagonal.size else 0.0)
    target = float(tolerance) * lam_bound

    factor = splu((matrix - float(shift) * sp.identity(n, format="csr")).tocsc())

    width = max(1, min(int(block_size), n))
    cap = int(max_iterations) if max_iterations is not None else n + 10
    rng = np.random.default_rng(int(seed))

    block = _orthonormalize(rng.standard_normal((n, width)), None)
    basis = block
    image = np.asarray(matrix @ block)

    theta = np.empty(0)
    ritz = np.empty((n, 0))
    worst = math.inf
    complete = False
    for _ in range(cap):
        if basis.shape[1] >= k:
            theta, ritz, residuals = _rayleigh_ritz(basis, image, k)
            worst = float(residuals.max())
            if basis.shape[1] >= n:
                complete = True
                break
            if worst <= target:
                if _spectrum_is_complete(matrix, theta):
                    complete = True
                    break
                # The basis is nearly invariant but misses a lower eigenvector.
                block = _orthonormalize(rng.standard_normal((n, width)), basis)
                if block.shape[1] == 0:
                    break
                basis = np.hstack([basis, block])
                image = np.hstack([image, np.asarray(matrix @ block)])

        candidates = _orthonormalize(factor.solve(np.ascontiguousarray(block)), basis)
        if candidates.shape[1] == 0:
            # Invariant subspace: restart the chain from fresh random directions.
            candidates = _orthonormalize(rng.standard_normal((n, width)), basis)
            if candidates.shape[1] == 0:
                break
        candidates = candidates[:, : n - basis.shape[1]]
        basis = np.hstack([basis, candidates])
        image = np.hstack([image, np.asarray(matrix @ candidates)])
        block = candidates

    if not complete and basis.shape[1] >= k:
        theta, ritz, residuals = _rayleigh_ritz(basis, image, k)
        worst = float(residuals.max())
        complete = basis.shape[1] >= n or (
            worst <= target and _spectrum_is_complete(matrix, theta)
        )

    if not complete:
        raise NumericalError(
            f"partial eigensolver did not converge for k={k} within {cap} iterations",
            residual=worst,
        )

    values, vectors = _ordered(theta, ritz)
    return SpectralBasis(
        eigenvalues=values,
        eigenvectors=vectors,
        mode=BASIS_MODE_PARTIAL,
        laplacian_hash=laplacian.content_hash(),
    )
