"""Mahalanobis metric matrices: quadratic-form distances, matrix norms,
projection onto the positive semidefinite cone, and rank diagnostics.

All functions are pure and operate on plain float64 arrays; MetricMatrix is
a thin validated carrier used at API boundaries. The squared distance
d(x, x') = (x - x')^T M (x - x') is a pseudometric for PSD M: a low-rank M
deliberately maps distinct points to distance zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericError

# Largest |M[i,j] - M[j,i]| tolerated before a matrix is rejected as asymmetric.
SYMMETRY_TOL = 1e-12
# Slack allowed on the smallest eigenvalue of a "PSD" matrix.
PSD_SLACK = 1e-10
# Default relative eigenvalue threshold for numerical rank.
RANK_REL_TOL = 1e-8


def _as_square_array(entries, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(entries, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidArgumentError(f"{name} must be square, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class MetricMatrix:
    """Symmetric d x d metric matrix (entries are read-only once constructed)."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_square_array(self.entries, "metric")
        if not np.all(np.isfinite(arr)):
            raise NumericError("metric contains non-finite entries")
        if np.max(np.abs(arr - arr.T), initial=0.0) > SYMMETRY_TOL:
            raise InvalidArgumentError("metric is not symmetric within 1e-12")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "MetricMatrix":
        if dim < 1:
            raise InvalidArgumentError(f"dim must be positive, got {dim}")
        return cls(np.eye(dim))


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in descending order, eigenvectors as matching columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def metric_entries(m) -> np.ndarray:
    """Accept a MetricMatrix or a bare array and return the float64 array."""
    if isinstance(m, MetricMatrix):
        return m.entries
    return _as_square_array(m, "metric")


def eigendecompose(m) -> EigenDecomposition:
    """Symmetric eigendecomposition with eigenvalues sorted descending.

    Single backend for PSD projection and rank diagnostics. The input is
    symmetrized as (M + M^T)/2 first to absorb floating-point drift.
    """
    arr = metric_entries(m)
    if not np.all(np.isfinite(arr)):
        raise NumericError("cannot eigendecompose a matrix with non-finite entries")
    sym = (arr + arr.T) / 2.0
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh rarely fails
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(eigenvalues)[::-1]
    return EigenDecomposition(eigenvalues[order], eigenvectors[:, order])


def mahalanobis_sq(m, xi, xj) -> float:
    """Squared distance (xi - xj)^T M (xi - xj); squared Euclidean when M = I."""
    arr = metric_entries(m)
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    if xi.shape != (arr.shape[0],) or xj.shape != (arr.shape[0],):
        raise InvalidArgumentError(
            f"vectors must have length {arr.shape[0]}, got {xi.shape} and {xj.shape}"
        )
    diff = xi - xj
    return max(0.0, float(diff @ arr @ diff))


def pairwise_mahalanobis_sq(m, queries, points) -> np.ndarray:
    """All squared distances between query rows and point rows under M.

    Expands (q - x)^T M (q - x) = q^T M q - 2 q^T M x + x^T M x so the whole
    block is three matrix products; tiny negative values from cancellation
    are clipped to zero.
    """
    arr = metric_entries(m)
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if q.shape[1] != arr.shape[0] or x.shape[1] != arr.shape[0]:
        raise InvalidArgumentError(
            f"rows must have length {arr.shape[0]}, got {q.shape[1]} and {x.shape[1]}"
        )
    qm = q @ arr
    xm = x @ arr
    d = np.einsum("ij,ij->i", qm, q)[:, None] - 2.0 * (qm @ x.T)
    d += np.einsum("ij,ij->i", xm, x)[None, :]
    return np.maximum(d, 0.0)


def mixed_21_norm(m) -> float:
    """Sum of the Euclidean norms of the rows of M."""
    arr = metric_entries(m)
    return float(np.sqrt((arr * arr).sum(axis=1)).sum())


def trace(m) -> float:
    """Sum of the diagonal elements of M."""
    arr = metric_entries(m)
    return float(np.trace(arr))


def project_psd(m) -> MetricMatrix:
    """Nearest (Frobenius) positive semidefinite matrix to a symmetric M.

    Clamps negative eigenvalues to zero and rebuilds V diag(max(lam, 0)) V^T.
    Idempotent; a matrix already in the cone comes back unchanged up to
    eigendecomposition roundoff.
    """
    decomp = eigendecompose(m)
    clamped = np.maximum(decomp.eigenvalues, 0.0)
    v = decomp.eigenvectors
    projected = (v * clamped) @ v.T
    return MetricMatrix((projected + projected.T) / 2.0)


def numerical_rank(m, rel_tol: float = RANK_REL_TOL) -> int:
    """Count of eigenvalues above rel_tol * lambda_max (0 when lambda_max <= 0).

    The threshold is relative so rescaling the data does not change the
    reported rank.
    """
    if rel_tol <= 0:
        raise InvalidArgumentError(f"rel_tol must be positive, got {rel_tol}")
    eigenvalues = eigendecompose(m).eigenvalues
    lam_max = eigenvalues[0]
    if lam_max <= 0.0:
        return 0
    return int(np.count_nonzero(eigenvalues > rel_tol * lam_max))


def min_eigenvalue(m) -> float:
    """Smallest eigenvalue of the symmetrized matrix."""
    return float(eigendecompose(m).eigenvalues[-1])
