import numpy as np
import pytest
from mesh_spectra.eigensolvers import (
    _count_below,
    eigendecompose_dense,
    eigendecompose_partial,
    estimate_dense_memory_bytes,
    fix_signs,
)
from mesh_spectra.errors import NumericalError, ResourceLimitError
from mesh_spectra.fixtures import disc_counts, make_disc_fixture, make_icosphere
from mesh_spectra.graph_spectral import basis_diagnostics, build_laplacian
from mesh_spectra.mesh_core import build_graph


def _laplacian(level: int):
    return build_laplacian(build_graph(make_icosphere(level)))


def test_fix_signs_makes_largest_entry_positive() -> None:
    vectors = np.array([[-1.0, 0.5], [1.0, -2.0]])
    np.testing.assert_array_equal(fix_signs(vectors), [[1.0, -0.5], [-1.0, 2.0]])


def test_dense_ceiling() -> None:
    laplacian = _laplacian(1)
    with pytest.raises(ResourceLimitError, match="GiB"):
        eigendecompose_dense(laplacian, dense_ceiling=10)
    basis = eigendecompose_dense(laplacian, dense_ceiling=10, allow_large=True)
    assert basis.size == 42
    assert estimate_dense_memory_bytes(12337) == 3 * 8 * 12337 * 12337


def test_partial_agrees_with_dense() -> None:
    laplacian = _laplacian(2)
    dense = eigendecompose_dense(laplacian)
    # 16 closes the fourth degenerate eigenvalue group of the icosphere.
    partial = eigendecompose_partial(laplacian, 16, seed=7)

    assert partial.mode == "partial" and partial.size == 16
    np.testing.assert_allclose(partial.eigenvalues, dense.eigenvalues[:16], atol=1e-8)

    dense_projector = dense.eigenvectors[:, :16] @ dense.eigenvectors[:, :16].T
    partial_projector = partial.eigenvectors @ partial.eigenvectors.T
    np.testing.assert_allclose(partial_projector, dense_projector, atol=1e-6)

    report = basis_diagnostics(laplacian, partial)
    assert report["orthonormality_error"] <= 1e-10
    assert report["max_residual"] <= 1e-8 * report["residual_scale"]


def test_partial_is_deterministic_per_seed() -> None:
    laplacian = _laplacian(2)
    first = eigendecompose_partial(laplacian, 9, seed=3)
    second = eigendecompose_partial(laplacian, 9, seed=3)
    np.testing.assert_array_equal(first.eigenvalues, second.eigenvalues)
    np.testing.assert_array_equal(first.eigenvectors, second.eigenvectors)


def test_partial_argument_checks() -> None:
    laplacian = _laplacian(0)
    with pytest.raises(ValueError):
        eigendecompose_partial(laplacian, 0)
    with pytest.raises(ValueError):
        eigendecompose_partial(laplacian, 12)
    with pytest.raises(ValueError, match="shift"):
        eigendecompose_partial(laplacian, 3, shift=0.5)


def test_partial_reports_non_convergence() -> None:
    with pytest.raises(NumericalError) as excinfo:
        eigendecompose_partial(_laplacian(3), 2, seed=0, tolerance=1e-30, max_iterations=1)
    assert excinfo.value.residual > 0.0


_SWEEP_MESHES = {
    "icosphere_0": lambda: make_icosphere(0),
    "icosphere_1": lambda: make_icosphere(1),
    "icosphere_2": lambda: make_icosphere(2),
    "disc_200": lambda: make_disc_fixture(*disc_counts(200, 30)),
    "disc_500": lambda: make_disc_fixture(*disc_counts(500, 40)),
}


@pytest.mark.parametrize("name", sorted(_SWEEP_MESHES))
@pytest.mark.parametrize("fraction", [0.0, 0.2, 0.5, 0.8, 1.0])
def test_partial_matches_dense_across_k(name: str, fraction: float) -> None:
    laplacian = build_laplacian(build_graph(_SWEEP_MESHES[name]()))
    n = laplacian.dimension
    k = min(n - 1, max(1, round(fraction * (n - 1))))
    dense = eigendecompose_dense(laplacian)

    partial = eigendecompose_partial(laplacian, k, seed=11)

    assert partial.size == k
    np.testing.assert_allclose(partial.eigenvalues, dense.eigenvalues[:k], atol=1e-6)
    report = basis_diagnostics(laplacian, partial)
    assert report["orthonormality_error"] <= 1e-8
    assert report["max_residual"] <= 1e-8 * report["residual_scale"]


def test_inertia_count_matches_dense_spectrum() -> None:
    laplacian = build_laplacian(build_graph(make_disc_fixture(*disc_counts(60, 15))))
    values = eigendecompose_dense(laplacian).eigenvalues
    for index in (0, 7, 30, 58):
        sigma = 0.5 * (values[index] + values[index + 1])
        if values[index + 1] - values[index] < 1e-6:
            continue
        assert _count_below(laplacian.matrix, sigma) == index + 1
    assert _count_below(laplacian.matrix, -0.5) == 0
