"""Dataset ingestion, standardization, splitting, and sliding-window
construction for time-series forecasting.

CSV is the single ingestion format: UTF-8, first row header, numeric cells
(plain decimals or scientific notation). Targets are kept in original units
throughout; only features are ever standardized.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataFormatError,
    DegenerateDataError,
    InsufficientDataError,
    InvalidArgumentError,
)

# Standard deviations at or below this floor mark a feature as constant.
SCALE_FLOOR = 1e-12


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """n x d feature matrix plus length-n target vector."""

    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.features, dtype=float))
        y = np.asarray(self.targets, dtype=float).ravel()
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise InvalidArgumentError(f"need n >= 1 and d >= 1, got shape {x.shape}")
        if y.shape[0] != x.shape[0]:
            raise InvalidArgumentError(
                f"targets length {y.shape[0]} != feature rows {x.shape[0]}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidArgumentError("dataset contains non-finite values")
        names = self.feature_names
        if names is not None:
            names = tuple(str(n) for n in names)
            if len(names) != x.shape[1]:
                raise InvalidArgumentError(
                    f"{len(names)} feature names for {x.shape[1]} columns"
                )
        object.__setattr__(self, "features", _readonly(x))
        object.__setattr__(self, "targets", _readonly(y))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.features[idx], self.targets[idx], self.feature_names)


@dataclass(frozen=True)
class Standardizer:
    """Per-feature centering/scaling fitted on training features only.

    Scales are population standard deviations floored at 1e-12; a column
    whose scale sits at the floor is treated as constant and maps to zero.
    """

    means: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float).ravel()
        scales = np.asarray(self.scales, dtype=float).ravel()
        if means.shape != scales.shape:
            raise InvalidArgumentError("means and scales must have equal length")
        if np.any(scales <= 0):
            raise InvalidArgumentError("scales must be strictly positive")
        object.__setattr__(self, "means", _readonly(means))
        object.__setattr__(self, "scales", _readonly(scales))

    @property
    def dim(self) -> int:
        return self.means.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim))

    def transform(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=float))
        if x.shape[1] != self.dim:
            raise InvalidArgumentError(
                f"expected {self.dim} features, got {x.shape[1]}"
            )
        z = (x - self.means) / self.scales
        constant = self.scales <= SCALE_FLOOR
        if np.any(constant):
            z[:, constant] = 0.0
        return z

    def inverse_transform(self, features) -> np.ndarray:
        z = np.atleast_2d(np.asarray(features, dtype=float))
        if z.shape[1] != self.dim:
            raise InvalidArgumentError(
                f"expected {self.dim} features, got {z.shape[1]}"
            )
        return z * self.scales + self.means


def fit_standardizer(train: Dataset) -> Standardizer:
    """Fit per-feature means and floored population standard deviations."""
    if train.n < 2:
        raise InsufficientDataError("standardizer needs at least 2 rows to fit")
    means = train.features.mean(axis=0)
    scales = np.maximum(train.features.std(axis=0), SCALE_FLOOR)
    return Standardizer(means, scales)


def apply_standardizer(s: Standardizer, data: Dataset) -> Dataset:
    return Dataset(s.transform(data.features), data.targets, data.feature_names)


@dataclass(frozen=True)
class SeriesSpec:
    """Sliding-window layout: lag_window past values predict the value
    `horizon` steps after the window ends."""

    lag_window: int = 45
    horizon: int = 1
    train_count: int | None = None

    def __post_init__(self):
        if self.lag_window < 1:
            raise InvalidArgumentError(f"lag_window must be >= 1, got {self.lag_window}")
        if self.horizon < 1:
            raise InvalidArgumentError(f"horizon must be >= 1, got {self.horizon}")


def _read_numeric_table(path) -> tuple[list[str], np.ndarray]:
    """Parse a header-first CSV of numeric cells into (header, n x c array)."""
    if not os.path.exists(path):
        raise DataFormatError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"empty file: {path}") from None
        header = [h.strip() for h in header]
        rows = []
        for row_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and row[0].strip() == ""):
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}: row {row_no} has {len(row)} cells, expected {len(header)}"
                )
            parsed = []
            for col, cell in zip(header, row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataFormatError(
                        f"{path}: non-numeric cell {cell!r} at row {row_no}, "
                        f"column {col!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise DataFormatError(f"no data rows in {path}")
    return header, np.asarray(rows, dtype=float)


def load_csv(path, target_column) -> Dataset:
    """Read a header-first CSV into a Dataset.

    target_column selects the target by header name or 0-based column index;
    every remaining column becomes a feature, in file order.
    """
    header, table = _read_numeric_table(path)
    if isinstance(target_column, int) and not isinstance(target_column, bool):
        if not 0 <= target_column < len(header):
            raise DataFormatError(
                f"target column index {target_column} out of range for "
                f"{len(header)} columns"
            )
        target_idx = target_column
    else:
        try:
            target_idx = header.index(str(target_column))
        except ValueError:
            raise DataFormatError(
                f"target column {target_column!r} not in header {header}"
            ) from None
    feature_idx = [i for i in range(len(header)) if i != target_idx]
    names = tuple(header[i] for i in feature_idx)
    return Dataset(table[:, feature_idx], table[:, target_idx], names)


def load_features_csv(path) -> tuple[np.ndarray, tuple[str, ...]]:
    """Read every column of a header-first CSV as features (no target)."""
    header, table = _read_numeric_table(path)
    return table, tuple(header)


def save_csv(data: Dataset, path, target_name: str = "target") -> None:
    """Write a Dataset as CSV with full float precision (round-trips exactly)."""
    names = data.feature_names or tuple(f"x{i + 1}" for i in range(data.dim))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + [target_name])
        for row, y in zip(data.features, data.targets):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(y))])


def read_series(path) -> np.ndarray:
    """Read a univariate series: newline-delimited numbers or a one-column CSV.

    A single non-numeric first line is treated as a header and skipped.
    """
    if not os.path.exists(path):
        raise DataFormatError(f"no such file: {path}")
    values = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            cell = line.strip().rstrip(",")
            if not cell:
                continue
            if "," in cell:
                parts = [p for p in cell.split(",") if p.strip()]
                if len(parts) != 1:
                    raise DataFormatError(
                        f"{path}: line {line_no} has {len(parts)} columns, expected 1"
                    )
                cell = parts[0].strip()
            try:
                values.append(float(cell))
            except ValueError:
                if line_no == 1:
                    continue  # header line
                raise DataFormatError(
                    f"{path}: non-numeric value {cell!r} at line {line_no}"
                ) from None
    if not values:
        raise DataFormatError(f"no numeric values in {path}")
    return np.asarray(values, dtype=float)


def split_prefix(data: Dataset, train_count: int) -> tuple[Dataset, Dataset]:
    """Temporal split: first train_count rows train, the rest test, no shuffle."""
    if not 1 <= train_count < data.n:
        raise InvalidArgumentError(
            f"train_count must be in [1, {data.n - 1}], got {train_count}"
        )
    idx = np.arange(data.n)
    return data.take(idx[:train_count]), data.take(idx[train_count:])


def kfold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Shuffle 0..n-1 with the given seed and partition into k near-equal folds."""
    if k < 2:
        raise InvalidArgumentError(f"need k >= 2 folds, got {k}")
    if k > n:
        raise InvalidArgumentError(f"cannot make {k} folds from {n} rows")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(perm, k)]


def split_folds(data: Dataset, k: int, seed: int) -> list[tuple[Dataset, Dataset]]:
    """k cross-validation (train, heldout) pairs from kfold_indices."""
    folds = kfold_indices(data.n, k, seed)
    out = []
    for fold in folds:
        mask = np.ones(data.n, dtype=bool)
        mask[fold] = False
        out.append((data.take(np.flatnonzero(mask)), data.take(fold)))
    return out


def window_series(series, spec: SeriesSpec) -> Dataset:
    """Turn a univariate series into supervised examples.

    Example i has features (series[i], ..., series[i+lag-1]) and target
    series[i+lag-1+horizon]; every feature strictly precedes its target.
    """
    x = np.asarray(series, dtype=float).ravel()
    lag, horizon = spec.lag_window, spec.horizon
    n_examples = x.shape[0] - lag - horizon + 1
    if n_examples < 1:
        raise InsufficientDataError(
            f"series of length {x.shape[0]} too short for lag {lag} "
            f"and horizon {horizon}"
        )
    idx = np.arange(lag)[None, :] + np.arange(n_examples)[:, None]
    features = x[idx]
    targets = x[np.arange(n_examples) + lag - 1 + horizon]
    names = tuple(f"lag_{lag - j}" for j in range(lag))
    return Dataset(features, targets, names)
