"""Spatial and spectral error measures, the frequency-decomposition loss and its gradient."""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.spatial import cKDTree

from .constants import (
    DEFAULT_LAMBDA_F,
    DEFAULT_LAMBDA_J,
    DEFAULT_LAMBDA_V,
    LOSS_LEVELS,
    MSNR_CAP,
    MSNR_FLOOR,
    SPECTRAL_EPSILON,
)
from .eigensolvers import eigendecompose_dense
from .fixtures import disc_counts, make_disc_fixture
from .graph_spectral import SpectralBasis, build_laplacian
from .mesh_core import TriangleMesh, build_graph
from .surface import SurfaceIndex

CHAMFER_VERTEX = "vertex"
CHAMFER_SURFACE = "surface"
CHAMFER_MODES = (CHAMFER_VERTEX, CHAMFER_SURFACE)

MSNR_CSV_HEADER = ("freq_index", "s_f")

GradientFn = Callable[[SpectralBasis, np.ndarray, np.ndarray], np.ndarray]


def resolve_log_base(base: str | float) -> float:
    """'e', '10', '2' or any positive number other than 1."""
    if isinstance(base, str):
        token = base.strip().lower()
        value = math.e if token == "e" else float(token)
    else:
        value = float(base)
    if not value > 0.0 or value == 1.0:
        raise ValueError(f"invalid logarithm base {base!r}")
    return value


def _matching_pair(pred: np.ndarray, gt: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"{what} shapes differ: {p.shape} vs {g.shape}")
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValueError(f"{what} must have shape (N, 3), got {p.shape}")
    if p.shape[0] == 0:
        raise ValueError(f"{what} must not be empty")
    return p, g


def per_vertex_error(pred: np.ndarray, gt: np.ndarray) -> float:
    p, g = _matching_pair(pred, gt, "vertex sets")
    return float(np.mean(np.linalg.norm(p - g, axis=1)))


def mpjpe(pred_joints: np.ndarray, gt_joints: np.ndarray) -> float:
    p, g = _matching_pair(pred_joints, gt_joints, "joint sets")
    return float(np.mean(np.linalg.norm(p - g, axis=1)))


def _nearest_vertex_distances(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    _, nearest = cKDTree(target).query(source, k=1)
    return np.linalg.norm(source - target[np.asarray(nearest, dtype=np.int64)], axis=1)


def chamfer_distance(a: TriangleMesh, b: TriangleMesh, mode: str = CHAMFER_VERTEX) -> float:
    """Symmetric mean of nearest distances, halved."""
    if a.vertex_count == 0 or b.vertex_count == 0:
        raise ValueError("chamfer distance needs non-empty vertex sets")
    if mode == CHAMFER_VERTEX:
        forward = _nearest_vertex_distances(a.vertices, b.vertices)
        backward = _nearest_vertex_distances(b.vertices, a.vertices)
    elif mode == CHAMFER_SURFACE:
        forward = SurfaceIndex(b).query(a.vertices).distances
        backward = SurfaceIndex(a).query(b.vertices).distances
    else:
        raise ValueError(f"unknown chamfer mode {mode!r}; expected one of {CHAMFER_MODES}")
    return 0.5 * (float(np.mean(forward)) + float(np.mean(backward)))


@dataclass(frozen=True, eq=False)
class _SpectralTerms:
    pred: np.ndarray
    error: np.ndarray
    pred_norm: np.ndarray
    gt_norm: np.ndarray
    error_sq: np.ndarray


def _spectral_terms(basis: SpectralBasis, pred: np.ndarray, gt: np.ndarray) -> _SpectralTerms:
    p, g = _matching_pair(pred, gt, "signals")
    if p.shape[0] != basis.dimension:
        raise ValueError(f"signals have {p.shape[0]} rows, basis expects {basis.dimension}")
    coeff_pred = basis.eigenvectors.T @ p
    coeff_gt = basis.eigenvectors.T @ g
    coeff_error = basis.eigenvectors.T @ (p - g)
    return _SpectralTerms(
        pred=coeff_pred,
        error=coeff_error,
        pred_norm=np.linalg.norm(coeff_pred, axis=1),
        gt_norm=np.linalg.norm(coeff_gt, axis=1),
        error_sq=np.sum(coeff_error**2, axis=1),
    )


def frequency_loss(
    basis: SpectralBasis,
    pred: np.ndarray,
    gt: np.ndarray,
    *,
    epsilon: float = SPECTRAL_EPSILON,
    log_base: str | float = "e",
) -> float:
    """Mean over all frequencies of log(||e_f||^2 / (||p_f|| ||g_f|| + eps) + 1)."""
    basis.require_full("frequency_loss")
    terms = _spectral_terms(basis, pred, gt)
    ratio = terms.error_sq / (terms.pred_norm * terms.gt_norm + epsilon)
    return float(np.mean(np.log1p(ratio)) / math.log(resolve_log_base(log_base)))


def frequency_loss_gradient(
    basis: SpectralBasis,
    pred: np.ndarray,
    gt: np.ndarray,
    *,
    epsilon: float = SPECTRAL_EPSILON,
    log_base: str | float = "e",
) -> np.ndarray:
    """Analytic d(frequency_loss)/d(pred), shape N x 3.

    Rows with a zero predicted coefficient use the zero subgradient for ||p_f||.
    """
    basis.require_full("frequency_loss_gradient")
    terms = _spectral_terms(basis, pred, gt)
    denom = terms.pred_norm * terms.gt_norm + epsilon
    ratio = terms.error_sq / denom
    scale = 1.0 / (basis.size * math.log(resolve_log_base(log_base)) * (1.0 + ratio))

    safe_norm = np.where(terms.pred_norm > 0.0, terms.pred_norm, 1.0)
    unit_pred = np.where(terms.pred_norm[:, None] > 0.0, terms.pred / safe_norm[:, None], 0.0)
    d_ratio = 2.0 * terms.error / denom[:, None] - (
        (terms.error_sq * terms.gt_norm / denom**2)[:, None] * unit_pred
    )
    return basis.eigenvectors @ (scale[:, None] * d_ratio)


@dataclass(frozen=True)
class LossWeights:
    lambda_j: float = DEFAULT_LAMBDA_J
    lambda_v: tuple[float, ...] = DEFAULT_LAMBDA_V
    lambda_f: tuple[float, ...] = DEFAULT_LAMBDA_F

    def __post_init__(self) -> None:
        lambda_v = tuple(float(x) for x in self.lambda_v)
        lambda_f = tuple(float(x) for x in self.lambda_f)
        if len(lambda_v) != LOSS_LEVELS or len(lambda_f) != LOSS_LEVELS:
            raise ValueError(f"lambda_v and lambda_f need {LOSS_LEVELS} entries each")
        if float(self.lambda_j) < 0.0 or min(lambda_v) < 0.0 or min(lambda_f) < 0.0:
            raise ValueError("loss weights must be non-negative")
        object.__setattr__(self, "lambda_j", float(self.lambda_j))
        object.__setattr__(self, "lambda_v", lambda_v)
        object.__setattr__(self, "lambda_f", lambda_f)

    @classmethod
    def from_mapping(cls, payload: Mapping[str, Any]) -> LossWeights:
        """Accepts `lambda_J`, `lambda_v` and `lambda_F` keys (lower-case J and F also work)."""
        known = {"lambda_J", "lambda_j", "lambda_v", "lambda_F", "lambda_f"}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ValueError(f"unknown loss weight keys {unknown}")
        defaults = cls()
        try:
            return cls(
                lambda_j=payload.get("lambda_J", payload.get("lambda_j", defaults.lambda_j)),
                lambda_v=tuple(payload.get("lambda_v", defaults.lambda_v)),
                lambda_f=tuple(payload.get("lambda_F", payload.get("lambda_f", defaults.lambda_f))),
            )
        except TypeError as exc:
            raise ValueError(f"malformed loss weights: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> LossWeights:
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"loss weights are not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ValueError("loss weights must be a JSON object")
        return cls.from_mapping(payload)

    def to_dict(self) -> dict[str, Any]:
        return {
            "lambda_J": self.lambda_j,
            "lambda_v": list(self.lambda_v),
            "lambda_F": list(self.lambda_f),
        }


@dataclass(frozen=True, eq=False)
class LevelInputs:
    """Prediction, ground truth and full basis for one mesh resolution."""

    pred: np.ndarray
    gt: np.ndarray
    basis: SpectralBasis


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    joint_term: float
    mpjpe_mm: float | None
    vertex_losses: tuple[float, ...]
    frequency_losses: tuple[float, ...]
    vertex_terms: tuple[float, ...]
    frequency_terms: tuple[float, ...]
    weights: LossWeights = field(default_factory=LossWeights)

    def to_dict(self) -> dict[str, Any]:
        return {
            "total": self.total,
            "joint_term": self.joint_term,
            "mpjpe_mm": self.mpjpe_mm,
            "levels": [
                {
                    "level": index + 1,
                    "vertex_loss_mm": self.vertex_losses[index],
                    "frequency_loss": self.frequency_losses[index],
                    "vertex_term": self.vertex_terms[index],
                    "frequency_term": self.frequency_terms[index],
                }
                for index in range(len(self.vertex_losses))
            ],
            "weights": self.weights.to_dict(),
        }


def total_loss(
    levels: Sequence[LevelInputs],
    weights: LossWeights,
    *,
    pred_joints: np.ndarray | None = None,
    gt_joints: np.ndarray | None = None,
    epsilon: float = SPECTRAL_EPSILON,
    log_base: str | float = "e",
) -> LossBreakdown:
    """lambda_J L_J + sum over levels of (lambda_v L_v + lambda_F L_F).

    Without joints the joint term is 0 and `mpjpe_mm` is None.
    """
    if len(levels) != LOSS_LEVELS:
        raise ValueError(f"total loss needs {LOSS_LEVELS} levels, got {len(levels)}")
    if (pred_joints is None) != (gt_joints is None):
        raise ValueError("pred_joints and gt_joints must be given together")

    joint_error = None if pred_joints is None else mpjpe(pred_joints, gt_joints)
    joint_term = 0.0 if joint_error is None else weights.lambda_j * joint_error

    vertex_losses: list[float] = []
    frequency_losses: list[float] = []
    for level in levels:
        vertex_losses.append(per_vertex_error(level.pred, level.gt))
        frequency_losses.append(
            frequency_loss(level.basis, level.pred, level.gt, epsilon=epsilon, log_base=log_base)
        )
    vertex_terms = tuple(w * x for w, x in zip(weights.lambda_v, vertex_losses, strict=True))
    frequency_terms = tuple(
        w * x for w, x in zip(weights.lambda_f, frequency_losses, strict=True)
    )
    return LossBreakdown(
        total=float(joint_term + sum(vertex_terms) + sum(frequency_terms)),
        joint_term=float(joint_term),
        mpjpe_mm=joint_error,
        vertex_losses=tuple(vertex_losses),
        frequency_losses=tuple(frequency_losses),
        vertex_terms=vertex_terms,
        frequency_terms=frequency_terms,
        weights=weights,
    )


@dataclass(frozen=True, eq=False)
class MsnrReport:
    mean: float
    per_frequency: np.ndarray
    clamp_count: int

    def to_dict(self) -> dict[str, Any]:
        return {"mean": self.mean, "clamp_count": self.clamp_count}

    def to_csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(MSNR_CSV_HEADER)
        for index, value in enumerate(self.per_frequency.tolist()):
            writer.writerow([index, repr(float(value))])
        return buffer.getvalue()


def msnr(
    basis: SpectralBasis,
    pred: np.ndarray,
    gt: np.ndarray,
    *,
    epsilon: float = SPECTRAL_EPSILON,
    log_base: str | float = "10",
    cap: float = MSNR_CAP,
    floor: float = MSNR_FLOOR,
) -> MsnrReport:
    """Mean of S_f = log(||p_f|| / (||e_f|| + eps)) over all frequencies, clamped to [floor, cap].

    An exactly zero error scores the cap; a zero predicted amplitude with non-zero error
    scores the floor.
    """
    basis.require_full("msnr")
    terms = _spectral_terms(basis, pred, gt)
    error_norm = np.sqrt(terms.error_sq)
    base = math.log(resolve_log_base(log_base))
    with np.errstate(divide="ignore"):
        scores = np.log(terms.pred_norm / (error_norm + epsilon)) / base
    scores = np.where(error_norm == 0.0, cap, scores)
    scores = np.where((terms.pred_norm == 0.0) & (error_norm > 0.0), floor, scores)
    scores = np.clip(scores, floor, cap)
    clamped = int(np.count_nonzero((scores >= cap) | (scores <= floor)))
    return MsnrReport(mean=float(np.mean(scores)), per_frequency=scores, clamp_count=clamped)


def _adjacency_and_degree(mesh: TriangleMesh) -> tuple[Any, np.ndarray]:
    graph = build_graph(mesh)
    return graph.adjacency(), graph.degrees().astype(np.float64)


def masked_smooth(
    mesh: TriangleMesh,
    mask: np.ndarray,
    iterations: int = 1,
    factor: float = 0.5,
) -> TriangleMesh:
    """Simultaneous umbrella steps on masked vertices; unmasked and isolated vertices stay."""
    flags = np.asarray(mask, dtype=bool).reshape(-1)
    if flags.shape[0] != mesh.vertex_count:
        raise ValueError(f"mask has {flags.shape[0]} entries, mesh has {mesh.vertex_count}")
    if not 0.0 < float(factor) <= 1.0:
        raise ValueError(f"factor must lie in (0, 1], got {factor}")
    if int(iterations) < 0:
        raise ValueError("iterations must be non-negative")

    adjacency, degree = _adjacency_and_degree(mesh)
    movable = flags & (degree > 0)
    vertices = np.array(mesh.vertices, copy=True)
    if not np.any(movable):
        return mesh.with_vertices(vertices)
    f = float(factor)
    for _ in range(int(iterations)):
        average = (adjacency @ vertices)[movable] / degree[movable, None]
        vertices[movable] = (1.0 - f) * vertices[movable] + f * average
    return mesh.with_vertices(vertices)


def umbrella_offsets(mesh: TriangleMesh) -> np.ndarray:
    """Distance from each vertex to the mean of its neighbours (0 for isolated vertices)."""
    adjacency, degree = _adjacency_and_degree(mesh)
    offsets = np.zeros(mesh.vertex_count, dtype=np.float64)
    connected = degree > 0
    average = (adjacency @ mesh.vertices)[connected] / degree[connected, None]
    offsets[connected] = np.linalg.norm(average - mesh.vertices[connected], axis=1)
    return offsets


def make_smooth_mask(mesh: TriangleMesh, quantile: float = 0.9, rings: int = 1) -> np.ndarray:
    """Vertices whose umbrella offset reaches the given quantile, grown by `rings` one-rings."""
    if not 0.0 <= float(quantile) <= 1.0:
        raise ValueError(f"quantile must lie in [0, 1], got {quantile}")
    if int(rings) < 0:
        raise ValueError("rings must be non-negative")
    if mesh.vertex_count == 0:
        return np.zeros(0, dtype=bool)
    offsets = umbrella_offsets(mesh)
    threshold = float(np.quantile(offsets, float(quantile)))
    mask = (offsets >= threshold) & (offsets > 0.0)
    adjacency = build_graph(mesh).adjacency()
    for _ in range(int(rings)):
        mask = mask | (adjacency @ mask.astype(np.float64) > 0.0)
    return mask


@dataclass(frozen=True)
class GradcheckReport:
    seed: int
    vertex_count: int
    step: float
    tolerance: float
    relative_error: float
    max_abs_error: float
    loss: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "vertex_count": self.vertex_count,
            "step": self.step,
            "tolerance": self.tolerance,
            "relative_error": self.relative_error,
            "max_abs_error": self.max_abs_error,
            "loss": self.loss,
            "passed": self.passed,
        }


def gradcheck_fixture(size: int) -> TriangleMesh:
    """Disc of `size` vertices with roughly a quarter of them on the boundary."""
    vertex_count = int(size)
    if vertex_count < 3:
        raise ValueError("gradcheck size must be at least 3")
    boundary = min(vertex_count, max(3, vertex_count // 4))
    v, f, b = disc_counts(vertex_count, boundary)
    return make_disc_fixture(v, f, b)


def run_gradcheck(
    seed: int = 0,
    size: int = 30,
    step: float = 1.0e-5,
    tolerance: float = 1.0e-5,
    gradient_fn: GradientFn | None = None,
    *,
    noise_scale: float = 0.5,
) -> GradcheckReport:
    """Central differences of frequency_loss against the analytic gradient."""
    mesh = gradcheck_fixture(size)
    basis = eigendecompose_dense(build_laplacian(build_graph(mesh)))
    rng = np.random.default_rng(int(seed))
    gt = np.array(mesh.vertices, copy=True)
    pred = gt + rng.normal(0.0, float(noise_scale), size=gt.shape)

    analytic_fn = frequency_loss_gradient if gradient_fn is None else gradient_fn
    analytic = np.asarray(analytic_fn(basis, pred, gt), dtype=np.float64)

    numeric = np.zeros_like(pred)
    h = float(step)
    for index in np.ndindex(*pred.shape):
        forward = pred.copy()
        backward = pred.copy()
        forward[index] += h
        backward[index] -= h
        numeric[index] = (
            frequency_loss(basis, forward, gt) - frequency_loss(basis, backward, gt)
        ) / (2.0 * h)

    scale = max(float(np.linalg.norm(numeric)), np.finfo(np.float64).tiny)
    relative = float(np.linalg.norm(analytic - numeric)) / scale
    return GradcheckReport(
        seed=int(seed),
        vertex_count=mesh.vertex_count,
        step=h,
        tolerance=float(tolerance),
        relative_error=relative,
        max_abs_error=float(np.max(np.abs(analytic - numeric))),
        loss=frequency_loss(basis, pred, gt),
        passed=bool(relative <= float(tolerance)),
    )
