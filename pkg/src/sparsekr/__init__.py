"""Kernel regression with learned sparse (low-rank) Mahalanobis metrics.

The toolkit trains a distance metric for Nadaraya-Watson kernel regression
by minimizing leave-one-out squared error plus a trace regularizer, keeping
the metric in the PSD cone by eigenvalue clamping. Euclidean, full-rank
(factor-parameterized), and PCA-projected baselines share the same engine,
data pipeline, and evaluation surface.
"""

from .data import (
    Dataset,
    SeriesSpec,
    Standardizer,
    apply_standardizer,
    fit_standardizer,
    kfold_indices,
    load_csv,
    load_features_csv,
    read_series,
    save_csv,
    split_folds,
    split_prefix,
    window_series,
)
from .engine import (
    KernelConfig,
    gaussian_kernel,
    knn_indices,
    loo_predictions,
    predict_batch,
    predict_one,
    quadratic_loss,
)
from .errors import (
    DataFormatError,
    DegenerateDataError,
    InsufficientDataError,
    InvalidArgumentError,
    NumericError,
    SparsekrError,
)
from .evaluate import (
    EvalReport,
    GridCell,
    GridSearchResult,
    evaluate,
    grid_search,
    load_model,
    mare,
    rmse,
    save_model,
)
from .learners import (
    Model,
    TrainConfig,
    TrainRecord,
    TrainSummary,
    TrainTrace,
    fd_gradient_check,
    kr_train,
    krpca_train,
    krsml_gradient,
    krsml_train,
    mlkr_gradient,
    mlkr_train,
    pca_fit,
)
from .metric import (
    EigenDecomposition,
    MetricMatrix,
    eigendecompose,
    mahalanobis_sq,
    min_eigenvalue,
    mixed_21_norm,
    numerical_rank,
    pairwise_mahalanobis_sq,
    project_psd,
    trace,
)
from .report import BenchRow, run_bench, write_report

__version__ = "0.1.0"

__all__ = [
    "BenchRow",
    "DataFormatError",
    "Dataset",
    "DegenerateDataError",
    "EigenDecomposition",
    "EvalReport",
    "GridCell",
    "GridSearchResult",
    "InsufficientDataError",
    "InvalidArgumentError",
    "KernelConfig",
    "MetricMatrix",
    "Model",
    "NumericError",
    "SeriesSpec",
    "SparsekrError",
    "Standardizer",
    "TrainConfig",
    "TrainRecord",
    "TrainSummary",
    "TrainTrace",
    "apply_standardizer",
    "eigendecompose",
    "evaluate",
    "fd_gradient_check",
    "fit_standardizer",
    "gaussian_kernel",
    "grid_search",
    "kfold_indices",
    "knn_indices",
    "kr_train",
    "krpca_train",
    "krsml_gradient",
    "krsml_train",
    "load_csv",
    "load_features_csv",
    "load_model",
    "loo_predictions",
    "mahalanobis_sq",
    "mare",
    "min_eigenvalue",
    "mixed_21_norm",
    "mlkr_gradient",
    "mlkr_train",
    "numerical_rank",
    "pairwise_mahalanobis_sq",
    "pca_fit",
    "predict_batch",
    "predict_one",
    "project_psd",
    "quadratic_loss",
    "read_series",
    "rmse",
    "run_bench",
    "save_csv",
    "save_model",
    "split_folds",
    "split_prefix",
    "trace",
    "window_series",
    "write_report",
]
