"""Evaluation metrics, model persistence, and hyperparameter grid search."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, Standardizer, split_folds
from .engine import KernelConfig, quadratic_loss
from .errors import (
    DataFormatError,
    DegenerateDataError,
    InvalidArgumentError,
    SparsekrError,
)
from .learners import Model, TrainConfig, TrainSummary, TrainTrace, krsml_train
from .metric import MetricMatrix, numerical_rank

MODEL_FORMAT_VERSION = 1

# Targets with |y| at or below this are excluded from MARE.
MARE_ZERO_TOL = 1e-12


def rmse(targets, predictions) -> float:
    """Root mean squared error sqrt(mean((y - y_hat)^2))."""
    y = np.asarray(targets, dtype=float).ravel()
    p = np.asarray(predictions, dtype=float).ravel()
    if y.shape != p.shape or y.shape[0] == 0:
        raise InvalidArgumentError(
            f"need equal nonzero lengths, got {y.shape[0]} and {p.shape[0]}"
        )
    return float(math.sqrt(np.mean((y - p) ** 2)))


def mare(targets, predictions, zero_tol: float = MARE_ZERO_TOL) -> tuple[float, int]:
    """Mean absolute relative error and the count of excluded near-zero targets.

    Points with |y| <= zero_tol would divide by (almost) zero and are skipped;
    if every point is skipped the metric is undefined.
    """
    y = np.asarray(targets, dtype=float).ravel()
    p = np.asarray(predictions, dtype=float).ravel()
    if y.shape != p.shape or y.shape[0] == 0:
        raise InvalidArgumentError(
            f"need equal nonzero lengths, got {y.shape[0]} and {p.shape[0]}"
        )
    if zero_tol < 0:
        raise InvalidArgumentError(f"zero_tol must be >= 0, got {zero_tol}")
    keep = np.abs(y) > zero_tol
    skipped = int(np.count_nonzero(~keep))
    if skipped == y.shape[0]:
        raise DegenerateDataError("all targets below zero tolerance; MARE undefined")
    value = float(np.mean(np.abs(y[keep] - p[keep]) / np.abs(y[keep])))
    return value, skipped


@dataclass(frozen=True)
class EvalReport:
    """Test-set metrics for one trained model."""

    learner_tag: str
    rmse: float
    mare: float
    accumulated_error: float
    metric_rank: int
    original_dim: int
    n_test: int
    skipped_mare_points: int
    train_trace_summary: TrainSummary | None = None


def evaluate(model: Model, test: Dataset, trace: TrainTrace | None = None) -> EvalReport:
    """Predict the test set (no exclusion) and assemble the metric report."""
    predictions = model.predict(test.features)
    mare_value, skipped = mare(test.targets, predictions)
    return EvalReport(
        learner_tag=model.learner_tag,
        rmse=rmse(test.targets, predictions),
        mare=mare_value,
        accumulated_error=quadratic_loss(test.targets, predictions),
        metric_rank=numerical_rank(model.metric),
        original_dim=model.input_dim,
        n_test=test.n,
        skipped_mare_points=skipped,
        train_trace_summary=trace.summary() if trace is not None else None,
    )


@dataclass(frozen=True)
class GridCell:
    alpha: float
    mu: float
    mean_rmse: float
    fold_rmses: tuple[float, ...]
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class GridSearchResult:
    best: TrainConfig
    table: tuple[GridCell, ...]


def grid_search(data: Dataset, alphas, mus, folds: int = 10, seed: int = 0,
                base: TrainConfig | None = None) -> GridSearchResult:
    """Cross-validated mean RMSE over an (alpha, mu) grid for the sparse
    metric learner.

    Ties break to the smaller mu, then the smaller alpha. A cell whose
    training fails is recorded with the error and skipped in the argmin.
    """
    alphas = [float(a) for a in alphas]
    mus = [float(m) for m in mus]
    if not alphas or not mus:
        raise InvalidArgumentError("alpha and mu grids must be nonempty")
    if folds < 2:
        raise InvalidArgumentError(f"need folds >= 2, got {folds}")
    if base is None:
        base = TrainConfig()
    pairs = split_folds(data, folds, seed)

    cells = []
    for alpha, mu in itertools.product(alphas, mus):
        cfg = TrainConfig(alpha=alpha, mu=mu, theta=base.theta,
                          max_iters=base.max_iters, kernel=base.kernel,
                          seed=base.seed)
        fold_scores = []
        error = None
        for train_part, heldout in pairs:
            try:
                model, _ = krsml_train(train_part, cfg)
                fold_scores.append(rmse(heldout.targets, model.predict(heldout.features)))
            except SparsekrError as exc:
                error = f"{type(exc).__name__}: {exc}"
                break
        if error is None:
            cells.append(GridCell(alpha, mu, float(np.mean(fold_scores)),
                                  tuple(fold_scores)))
        else:
            cells.append(GridCell(alpha, mu, float("nan"), tuple(fold_scores), error))

    viable = [c for c in cells if not c.failed]
    if not viable:
        raise DegenerateDataError("every grid cell failed to train")
    winner = min(viable, key=lambda c: (c.mean_rmse, c.mu, c.alpha))
    best = TrainConfig(alpha=winner.alpha, mu=winner.mu, theta=base.theta,
                       max_iters=base.max_iters, kernel=base.kernel, seed=base.seed)
    return GridSearchResult(best, tuple(cells))


def save_model(model: Model, path) -> None:
    """Write a model as versioned JSON; floats keep full round-trip precision."""
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "learner_tag": model.learner_tag,
        "dim": model.metric.dim,
        "metric": model.metric.entries.ravel().tolist(),
        "sigma": model.kernel.sigma,
        "k_neighbors": model.kernel.k_neighbors,
        "standardizer": {
            "means": model.standardizer.means.tolist(),
            "scales": model.standardizer.scales.tolist(),
        },
        "pca_basis": None,
        "train_features": {
            "rows": model.training_data.n,
            "cols": model.training_data.dim,
            "entries": model.training_data.features.ravel().tolist(),
        },
        "train_targets": model.training_data.targets.tolist(),
        "feature_names": list(model.training_data.feature_names)
        if model.training_data.feature_names else None,
    }
    if model.pca_basis is not None:
        payload["pca_basis"] = {
            "rows": model.pca_basis.shape[0],
            "cols": model.pca_basis.shape[1],
            "entries": model.pca_basis.ravel().tolist(),
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def _matrix_from(payload, rows_key="rows", cols_key="cols", what="matrix") -> np.ndarray:
    rows, cols = int(payload[rows_key]), int(payload[cols_key])
    entries = payload["entries"]
    if len(entries) != rows * cols:
        raise DataFormatError(
            f"{what} holds {len(entries)} entries, expected {rows * cols}"
        )
    return np.asarray(entries, dtype=float).reshape(rows, cols)


def load_model(path) -> Model:
    """Read a model file, validating version and entry counts before use."""
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"unreadable model file {path}: {exc}") from exc
    try:
        version = payload["format_version"]
        if version != MODEL_FORMAT_VERSION:
            raise DataFormatError(
                f"model format version {version} unsupported "
                f"(expected {MODEL_FORMAT_VERSION})"
            )
        dim = int(payload["dim"])
        metric_entries = payload["metric"]
        if len(metric_entries) != dim * dim:
            raise DataFormatError(
                f"metric holds {len(metric_entries)} entries, expected {dim * dim}"
            )
        metric = MetricMatrix(np.asarray(metric_entries, dtype=float).reshape(dim, dim))
        kernel = KernelConfig(k_neighbors=int(payload["k_neighbors"]),
                              sigma=float(payload["sigma"]))
        standardizer = Standardizer(payload["standardizer"]["means"],
                                    payload["standardizer"]["scales"])
        features = _matrix_from(payload["train_features"], what="train_features")
        targets = np.asarray(payload["train_targets"], dtype=float)
        if targets.shape[0] != features.shape[0]:
            raise DataFormatError(
                f"{targets.shape[0]} targets for {features.shape[0]} training rows"
            )
        names = payload.get("feature_names")
        training = Dataset(features, targets,
                           tuple(names) if names else None)
        basis = None
        if payload.get("pca_basis") is not None:
            basis = _matrix_from(payload["pca_basis"], what="pca_basis")
        return Model(metric, training, kernel, standardizer,
                     str(payload["learner_tag"]), pca_basis=basis)
    except KeyError as exc:
        raise DataFormatError(f"model file {path} missing field {exc}") from exc
