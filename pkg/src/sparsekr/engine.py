"""Nadaraya-Watson kernel regression under an arbitrary Mahalanobis metric:
neighbor selection, Gaussian weighting, batch and leave-one-out prediction.

Weights are computed as exp(-(d - d_min) / (2 sigma^2)) over the selected
neighbors, where d_min is the smallest selected distance. The 1/(sigma
sqrt(2 pi)) prefactor and the common shift both cancel in the prediction
ratio, so this is exactly the textbook estimator but immune to all-weights-
underflow for distant queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import InsufficientDataError, InvalidArgumentError
from .metric import pairwise_mahalanobis_sq

# Default bandwidth: with sigma = 1/sqrt(2) the kernel exponent is exactly
# -d(x, x'), the convention the metric-learning gradients assume.
DEFAULT_SIGMA = 1.0 / math.sqrt(2.0)
DEFAULT_K = 30

# Query rows processed per block when forming distance matrices.
_BATCH_ROWS = 1024


@dataclass(frozen=True)
class KernelConfig:
    k_neighbors: int = DEFAULT_K
    sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise InvalidArgumentError(
                f"k_neighbors must be >= 1, got {self.k_neighbors}"
            )
        if not self.sigma > 0:
            raise InvalidArgumentError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class NeighborState:
    """Per-query neighbor selection and kernel weighting.

    indices: (m, k) neighbor indices, nearest first, ties by ascending index.
    weights: shifted Gaussian weights, max 1 per row.
    weight_sums: row sums of weights.
    predictions: weighted-average estimates.
    """

    indices: np.ndarray
    weights: np.ndarray
    weight_sums: np.ndarray
    predictions: np.ndarray


def gaussian_kernel(dist_sq, sigma: float):
    """Gaussian kernel value (1/(sigma sqrt(2 pi))) exp(-dist_sq / (2 sigma^2))."""
    if not sigma > 0:
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    dist_sq = np.asarray(dist_sq, dtype=float)
    out = np.exp(-dist_sq / (2.0 * sigma * sigma)) / (sigma * math.sqrt(2.0 * math.pi))
    return float(out) if out.ndim == 0 else out


def _neighbor_state(dist: np.ndarray, targets: np.ndarray, cfg: KernelConfig) -> NeighborState:
    """Select neighbors and form predictions from a distance block.

    Excluded entries must already be +inf; each row must contain at least
    one finite entry.
    """
    n_available = dist.shape[1] - int(np.isinf(dist[0]).sum())
    if n_available < 1:
        raise InsufficientDataError("no training points available after exclusion")
    k = min(cfg.k_neighbors, n_available)
    # Stable sort: equal distances keep ascending-index order.
    order = np.argsort(dist, axis=1, kind="stable")
    indices = order[:, :k]
    d_sel = np.take_along_axis(dist, indices, axis=1)
    weights = np.exp(-(d_sel - d_sel[:, :1]) / (2.0 * cfg.sigma * cfg.sigma))
    weight_sums = weights.sum(axis=1)
    neighbor_targets = targets[indices]
    with np.errstate(invalid="ignore"):
        predictions = (weights * neighbor_targets).sum(axis=1) / weight_sums
    # Underflow guard: impossible after the shift (max weight is 1), kept
    # so a degenerate row falls back to the plain neighbor mean.
    dead = weight_sums == 0.0
    if np.any(dead):
        predictions[dead] = neighbor_targets[dead].mean(axis=1)
    return NeighborState(indices, weights, weight_sums, predictions)


def knn_indices(query, data: Dataset, m, k: int, exclude: int | None = None) -> np.ndarray:
    """Indices of the k nearest training rows to the query under metric m.

    Returns min(k, available) indices ordered nearest first; distance ties
    break by ascending training index. `exclude` removes one row by index.
    """
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    query = np.asarray(query, dtype=float).ravel()
    dist = pairwise_mahalanobis_sq(m, query[None, :], data.features)
    if exclude is not None:
        dist[0, exclude] = np.inf
    available = data.n - (1 if exclude is not None else 0)
    if available < 1:
        raise InsufficientDataError("no training points available after exclusion")
    order = np.argsort(dist[0], kind="stable")
    return order[: min(k, available)]


def predict_one(query, data: Dataset, m, cfg: KernelConfig, exclude: int | None = None) -> float:
    """Kernel-weighted average of the k nearest neighbor targets.

    The result is a convex combination of the selected targets, so it always
    lies within their [min, max] range.
    """
    query = np.asarray(query, dtype=float).ravel()
    dist = pairwise_mahalanobis_sq(m, query[None, :], data.features)
    if exclude is not None:
        dist[0, exclude] = np.inf
    return float(_neighbor_state(dist, data.targets, cfg).predictions[0])


def predict_batch(queries, data: Dataset, m, cfg: KernelConfig) -> np.ndarray:
    """Predictions for every query row; processed in blocks to bound memory."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    out = np.empty(queries.shape[0])
    for start in range(0, queries.shape[0], _BATCH_ROWS):
        block = queries[start : start + _BATCH_ROWS]
        dist = pairwise_mahalanobis_sq(m, block, data.features)
        out[start : start + _BATCH_ROWS] = _neighbor_state(
            dist, data.targets, cfg
        ).predictions
    return out


def loo_state(data: Dataset, m, cfg: KernelConfig) -> NeighborState:
    """Leave-one-out neighbor state over the whole dataset (row i excludes i)."""
    if data.n < 2:
        raise InsufficientDataError(
            f"leave-one-out prediction needs n >= 2, got n = {data.n}"
        )
    dist = pairwise_mahalanobis_sq(m, data.features, data.features)
    np.fill_diagonal(dist, np.inf)
    return _neighbor_state(dist, data.targets, cfg)


def loo_predictions(data: Dataset, m, cfg: KernelConfig) -> np.ndarray:
    """Vector of leave-one-out predictions, element i excluding example i."""
    return loo_state(data, m, cfg).predictions


def quadratic_loss(targets, predictions) -> float:
    """Accumulated squared error sum((y - y_hat)^2)."""
    y = np.asarray(targets, dtype=float).ravel()
    p = np.asarray(predictions, dtype=float).ravel()
    if y.shape != p.shape:
        raise InvalidArgumentError(
            f"targets and predictions differ in length: {y.shape[0]} vs {p.shape[0]}"
        )
    diff = y - p
    return float(diff @ diff)
