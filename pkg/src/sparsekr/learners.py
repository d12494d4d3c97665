"""Trainable regressors over a shared leave-one-out objective.

Four learners produce the same Model shape:

* kr_train      - Euclidean baseline, metric fixed at the identity.
* mlkr_train    - full-rank metric M = A^T A via gradient descent on the
                  factor A (PSD by construction, no projection step).
* krpca_train   - principal-component projection followed by Euclidean
                  kernel regression in the reduced space.
* krsml_train   - trace-regularized metric learning: gradient descent on M
                  itself with projection back onto the PSD cone each step,
                  driving eigenvalues to zero and the metric to low rank.

Both gradients flow through the same data term

    D = sum_i (yhat_i - y_i) * [sum_j (yhat_i - y_j) K_ij x_ij x_ij^T]
                              / [sum_j K_ij]  / sigma^2

with j ranging over i's current k nearest neighbors; dL/dM = D (+ mu I for
the trace regularizer) and dL/dA = 2 A D. Neighbor sets are recomputed
under the current metric at every iteration; the finite-difference checker
freezes them because the objective is only piecewise smooth across
neighbor-set boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Standardizer
from .engine import KernelConfig, NeighborState, loo_state, predict_batch, quadratic_loss
from .errors import (
    DegenerateDataError,
    InsufficientDataError,
    InvalidArgumentError,
    NumericError,
)
from .metric import MetricMatrix, eigendecompose, metric_entries, project_psd

# Most halvings of the step size tried before a descent step is rejected.
MAX_HALVINGS = 20

TAG_KR = "KR"
TAG_MLKR = "MLKR"
TAG_KR_PCA = "KR_PCA"
TAG_KR_SML = "KR_SML"


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared by the gradient-descent learners."""

    alpha: float = 0.01
    mu: float = 0.0
    theta: float = 1e-4
    max_iters: int = 200
    kernel: KernelConfig = field(default_factory=KernelConfig)
    seed: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidArgumentError(f"alpha must be positive, got {self.alpha}")
        if self.mu < 0:
            raise InvalidArgumentError(f"mu must be nonnegative, got {self.mu}")
        if not self.theta > 0:
            raise InvalidArgumentError(f"theta must be positive, got {self.theta}")
        # max_iters = 0 is allowed: it returns the identity-metric model.
        if self.max_iters < 0:
            raise InvalidArgumentError(
                f"max_iters must be nonnegative, got {self.max_iters}"
            )


@dataclass(frozen=True)
class TrainRecord:
    iteration: int
    loss: float
    trace_m: float
    rank: int
    min_eigenvalue: float
    accepted: bool
    step_size: float


@dataclass(frozen=True)
class TrainSummary:
    final_loss: float
    iterations: int
    accepted_steps: int


@dataclass(frozen=True)
class TrainTrace:
    records: tuple[TrainRecord, ...]

    def summary(self, final_loss: float | None = None) -> TrainSummary:
        accepted = sum(1 for r in self.records[1:] if r.accepted)
        if final_loss is None:
            final_loss = min(r.loss for r in self.records)
        return TrainSummary(final_loss, self.records[-1].iteration, accepted)


@dataclass(frozen=True)
class Model:
    """A trained regressor: metric + retained training data + preprocessing.

    Immutable once training completes. `predict` accepts raw (original-unit)
    feature rows and applies standardization and, for KR_PCA, the stored
    projection before querying the engine.
    """

    metric: MetricMatrix
    training_data: Dataset
    kernel: KernelConfig
    standardizer: Standardizer
    learner_tag: str
    pca_basis: np.ndarray | None = None

    def __post_init__(self):
        if self.metric.dim != self.training_data.dim:
            raise InvalidArgumentError(
                f"metric dim {self.metric.dim} != training feature dim "
                f"{self.training_data.dim}"
            )
        if self.pca_basis is not None:
            basis = np.asarray(self.pca_basis, dtype=float)
            if basis.shape != (self.standardizer.dim, self.metric.dim):
                raise InvalidArgumentError(
                    f"pca_basis shape {basis.shape} inconsistent with input dim "
                    f"{self.standardizer.dim} and metric dim {self.metric.dim}"
                )
            basis = basis.copy()
            basis.setflags(write=False)
            object.__setattr__(self, "pca_basis", basis)
        elif self.standardizer.dim != self.metric.dim:
            raise InvalidArgumentError(
                f"standardizer dim {self.standardizer.dim} != metric dim "
                f"{self.metric.dim}"
            )

    @property
    def input_dim(self) -> int:
        return self.standardizer.dim

    def transform(self, features) -> np.ndarray:
        z = self.standardizer.transform(features)
        if self.pca_basis is not None:
            z = z @ self.pca_basis
        return z

    def predict(self, features) -> np.ndarray:
        return predict_batch(self.transform(features), self.training_data,
                             self.metric, self.kernel)


def _resolve_standardizer(data: Dataset, standardizer: Standardizer | None) -> Standardizer:
    if standardizer is None:
        return Standardizer.identity(data.dim)
    if standardizer.dim != data.dim:
        raise InvalidArgumentError(
            f"standardizer dim {standardizer.dim} != data dim {data.dim}"
        )
    return standardizer


def _data_term(data: Dataset, state: NeighborState, sigma: float) -> np.ndarray:
    """Shared gradient core: the weighted sum of x_ij x_ij^T outer products."""
    x = data.features
    y = data.targets
    idx = state.indices
    residual = state.predictions - y
    coef = (
        residual[:, None]
        * (state.predictions[:, None] - y[idx])
        * state.weights
        / state.weight_sums[:, None]
    )
    diffs = x[:, None, :] - x[idx]
    grad = np.einsum("ij,ijp,ijq->pq", coef, diffs, diffs)
    grad /= sigma * sigma
    return (grad + grad.T) / 2.0


def krsml_gradient(data: Dataset, m, cfg: TrainConfig) -> np.ndarray:
    """Gradient of the leave-one-out loss plus mu * Tr(M) with respect to M."""
    state = loo_state(data, m, cfg.kernel)
    grad = _data_term(data, state, cfg.kernel.sigma)
    if cfg.mu:
        grad = grad + cfg.mu * np.eye(data.dim)
    return grad


def mlkr_gradient(data: Dataset, a, cfg: TrainConfig) -> np.ndarray:
    """Gradient of the leave-one-out loss with respect to the factor A."""
    a = np.asarray(a, dtype=float)
    if a.shape != (data.dim, data.dim):
        raise InvalidArgumentError(
            f"A must be {data.dim} x {data.dim}, got shape {a.shape}"
        )
    m = a.T @ a
    state = loo_state(data, (m + m.T) / 2.0, cfg.kernel)
    return 2.0 * a @ _data_term(data, state, cfg.kernel.sigma)


def _objective(data: Dataset, m, cfg: TrainConfig, mu: float) -> float:
    loss = quadratic_loss(data.targets, loo_state(data, m, cfg.kernel).predictions)
    if mu:
        loss += mu * float(np.trace(metric_entries(m)))
    return loss


def _record(records: list[TrainRecord], iteration: int, loss: float,
            metric_arr: np.ndarray, accepted: bool, step: float) -> None:
    eigenvalues = eigendecompose(metric_arr).eigenvalues
    lam_max = eigenvalues[0]
    rank = int(np.count_nonzero(eigenvalues > 1e-8 * lam_max)) if lam_max > 0 else 0
    records.append(
        TrainRecord(iteration, loss, float(np.trace(metric_arr)), rank,
                    float(eigenvalues[-1]), accepted, step)
    )


def _descend(data: Dataset, cfg: TrainConfig, param0, loss_fn, grad_fn,
             step_fn, metric_of):
    """Fixed-step gradient descent with per-step backtracking.

    A step that would increase the objective has its step size halved, up to
    MAX_HALVINGS times; if no decrease is found the step is rejected and the
    run stops. Returns (best parameter by recorded objective, trace).
    """
    if data.n < 2:
        raise InsufficientDataError(f"training needs n >= 2, got n = {data.n}")
    records: list[TrainRecord] = []
    param = param0
    loss = loss_fn(param)
    if not np.isfinite(loss):
        raise NumericError("non-finite loss at iteration 0")
    _record(records, 0, loss, metric_of(param), True, 0.0)
    best_loss, best_param = loss, param

    for t in range(1, cfg.max_iters + 1):
        grad = grad_fn(param)
        step = cfg.alpha
        accepted = False
        candidate = None
        candidate_loss = np.nan
        for _ in range(MAX_HALVINGS + 1):
            candidate = step_fn(param, step, grad)
            candidate_loss = loss_fn(candidate)
            if np.isfinite(candidate_loss) and candidate_loss <= loss:
                accepted = True
                break
            step /= 2.0
        if not accepted:
            if not np.isfinite(candidate_loss):
                raise NumericError(f"non-finite loss at iteration {t}")
            _record(records, t, loss, metric_of(param), False, step)
            break
        prev_loss = loss
        param, loss = candidate, candidate_loss
        _record(records, t, loss, metric_of(param), True, step)
        if loss < best_loss:
            best_loss, best_param = loss, param
        if abs(loss - prev_loss) <= cfg.theta:
            break

    return best_param, TrainTrace(tuple(records))


def krsml_train(data: Dataset, cfg: TrainConfig,
                standardizer: Standardizer | None = None) -> tuple[Model, TrainTrace]:
    """Learn a trace-regularized PSD metric starting from the identity.

    Each update M <- project_psd(M - alpha G) stays in the PSD cone; the
    returned model carries the iterate with the lowest recorded objective.
    """
    std = _resolve_standardizer(data, standardizer)
    m0 = MetricMatrix.identity(data.dim)
    best, trace = _descend(
        data, cfg,
        param0=m0,
        loss_fn=lambda m: _objective(data, m, cfg, cfg.mu),
        grad_fn=lambda m: krsml_gradient(data, m, cfg),
        step_fn=lambda m, step, g: project_psd(m.entries - step * g),
        metric_of=lambda m: m.entries,
    )
    model = Model(best, data, cfg.kernel, std, TAG_KR_SML)
    return model, trace


def mlkr_train(data: Dataset, cfg: TrainConfig,
               standardizer: Standardizer | None = None) -> tuple[Model, TrainTrace]:
    """Learn a full-rank metric M = A^T A by gradient descent on A.

    No projection is needed: A^T A is PSD by construction. The trace
    regularizer does not apply here; cfg.mu is ignored.
    """
    std = _resolve_standardizer(data, standardizer)

    def to_metric(a):
        m = a.T @ a
        return (m + m.T) / 2.0

    best_a, trace = _descend(
        data, cfg,
        param0=np.eye(data.dim),
        loss_fn=lambda a: _objective(data, to_metric(a), cfg, 0.0),
        grad_fn=lambda a: mlkr_gradient(data, a, cfg),
        step_fn=lambda a, step, g: a - step * g,
        metric_of=to_metric,
    )
    model = Model(MetricMatrix(to_metric(best_a)), data, cfg.kernel, std, TAG_MLKR)
    return model, trace


def kr_train(data: Dataset, kernel: KernelConfig,
             standardizer: Standardizer | None = None) -> Model:
    """Euclidean kernel regression baseline: the metric is the identity."""
    std = _resolve_standardizer(data, standardizer)
    return Model(MetricMatrix.identity(data.dim), data, kernel, std, TAG_KR)


def pca_fit(data: Dataset, variance_threshold: float) -> np.ndarray:
    """Orthonormal basis of the leading principal directions.

    Keeps the minimal p whose cumulative explained variance reaches the
    threshold. Column signs are fixed (largest-magnitude entry positive) so
    repeated fits are identical.
    """
    if not 0.0 < variance_threshold <= 1.0:
        raise InvalidArgumentError(
            f"variance_threshold must be in (0, 1], got {variance_threshold}"
        )
    if data.n < 2:
        raise InsufficientDataError(f"PCA needs n >= 2, got n = {data.n}")
    centered = data.features - data.features.mean(axis=0)
    cov = centered.T @ centered / data.n
    decomp = eigendecompose(cov)
    eigenvalues = np.maximum(decomp.eigenvalues, 0.0)
    cumulative = np.cumsum(eigenvalues)
    total = cumulative[-1]
    if total <= 1e-12:
        raise DegenerateDataError("cannot fit PCA on zero-variance data")
    ratios = cumulative / total
    p = int(np.searchsorted(ratios, variance_threshold - 1e-12)) + 1
    basis = decomp.eigenvectors[:, :p].copy()
    flip = basis[np.argmax(np.abs(basis), axis=0), np.arange(p)] < 0
    basis[:, flip] *= -1.0
    return basis


def krpca_train(data: Dataset, cfg: TrainConfig, variance_threshold: float = 0.95,
                standardizer: Standardizer | None = None) -> Model:
    """Project onto leading principal components, then run Euclidean KR."""
    std = _resolve_standardizer(data, standardizer)
    basis = pca_fit(data, variance_threshold)
    projected = Dataset(data.features @ basis, data.targets)
    return Model(MetricMatrix.identity(basis.shape[1]), projected, cfg.kernel,
                 std, TAG_KR_PCA, pca_basis=basis)


def frozen_neighbor_sets(data: Dataset, m, cfg: TrainConfig) -> np.ndarray:
    """Leave-one-out neighbor indices under a fixed metric, for gradient checks."""
    return loo_state(data, m, cfg.kernel).indices


def loo_loss_frozen(data: Dataset, m, kernel: KernelConfig,
                    neighbor_indices: np.ndarray) -> float:
    """Leave-one-out squared error with the neighbor sets held fixed.

    Distances are re-evaluated under `m` but only to the frozen neighbors,
    making the loss a smooth function of the metric.
    """
    x = data.features
    diffs = x[:, None, :] - x[neighbor_indices]
    arr = metric_entries(m)
    dist = np.einsum("ijp,pq,ijq->ij", diffs, arr, diffs)
    dist = np.maximum(dist, 0.0)
    weights = np.exp(-(dist - dist.min(axis=1, keepdims=True))
                     / (2.0 * kernel.sigma * kernel.sigma))
    predictions = (weights * data.targets[neighbor_indices]).sum(axis=1) / weights.sum(axis=1)
    return quadratic_loss(data.targets, predictions)


def fd_gradient_check(loss_fn, analytic_grad, point, h: float = 1e-5) -> float:
    """Worst relative disagreement between analytic and central-difference
    gradients, entry by entry.

    Relative error uses max(|analytic|, |numeric|, 1e-12) as denominator.
    """
    if not h > 0:
        raise InvalidArgumentError(f"h must be positive, got {h}")
    point = np.asarray(point, dtype=float)
    analytic = np.asarray(analytic_grad, dtype=float)
    if analytic.shape != point.shape:
        raise InvalidArgumentError(
            f"gradient shape {analytic.shape} != point shape {point.shape}"
        )
    numeric = np.zeros_like(point)
    for idx in np.ndindex(point.shape):
        bumped = point.copy()
        bumped[idx] = point[idx] + h
        f_plus = loss_fn(bumped)
        bumped[idx] = point[idx] - h
        f_minus = loss_fn(bumped)
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"non-finite loss while probing entry {idx}")
        numeric[idx] = (f_plus - f_minus) / (2.0 * h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric) / denom))
