"""Command-line interface.

Verbs: train, predict, eval, bench, window, tune. Exit codes: 0 success,
2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .data import (
    SeriesSpec,
    Standardizer,
    apply_standardizer,
    fit_standardizer,
    load_csv,
    load_features_csv,
    read_series,
    save_csv,
    split_prefix,
    window_series,
)
from .engine import DEFAULT_K, DEFAULT_SIGMA, KernelConfig
from .errors import NumericError, SparsekrError
from .evaluate import evaluate, grid_search, load_model, save_model
from .learners import (
    TAG_KR,
    TAG_KR_PCA,
    TAG_KR_SML,
    TAG_MLKR,
    TrainConfig,
    kr_train,
    krpca_train,
    krsml_train,
    mlkr_train,
)
from .report import BenchRow, run_bench, write_prediction_dump, write_report

LEARNER_CHOICES = {
    "kr": TAG_KR,
    "mlkr": TAG_MLKR,
    "kr_pca": TAG_KR_PCA,
    "kr_sml": TAG_KR_SML,
}


def _add_kernel_flags(parser):
    parser.add_argument("--k", type=int, default=DEFAULT_K,
                        help="number of nearest neighbors (default 30)")
    parser.add_argument("--sigma", type=float, default=DEFAULT_SIGMA,
                        help="Gaussian kernel bandwidth (default 1/sqrt(2))")


def _add_train_flags(parser):
    _add_kernel_flags(parser)
    parser.add_argument("--alpha", type=float, default=0.01,
                        help="gradient step size")
    parser.add_argument("--mu", type=float, default=0.1,
                        help="trace regularization weight")
    parser.add_argument("--theta", type=float, default=1e-4,
                        help="stop threshold on the loss change")
    parser.add_argument("--max-iters", type=int, default=200,
                        help="iteration cap")
    parser.add_argument("--variance-threshold", type=float, default=0.95,
                        help="explained-variance threshold for the PCA learner")
    parser.add_argument("--no-standardize", action="store_true",
                        help="skip feature standardization")
    parser.add_argument("--seed", type=int, default=0)


def _train_config(args) -> TrainConfig:
    return TrainConfig(alpha=args.alpha, mu=args.mu, theta=args.theta,
                       max_iters=args.max_iters,
                       kernel=KernelConfig(args.k, args.sigma), seed=args.seed)


def _cmd_train(args) -> int:
    data = load_csv(args.data, args.target)
    cfg = _train_config(args)
    std = Standardizer.identity(data.dim) if args.no_standardize else fit_standardizer(data)
    std_data = apply_standardizer(std, data)
    tag = LEARNER_CHOICES[args.learner]
    trace = None
    if tag == TAG_KR:
        model = kr_train(std_data, cfg.kernel, std)
    elif tag == TAG_MLKR:
        model, trace = mlkr_train(std_data, cfg, std)
    elif tag == TAG_KR_PCA:
        model = krpca_train(std_data, cfg, args.variance_threshold, std)
    else:
        model, trace = krsml_train(std_data, cfg, std)
    save_model(model, args.model)
    summary = f"{tag}: n={data.n} dim={data.dim} metric_dim={model.metric.dim}"
    if trace is not None:
        s = trace.summary()
        summary += (f" final_loss={s.final_loss:.6g} iterations={s.iterations}"
                    f" accepted={s.accepted_steps}")
    print(summary)
    print(f"model written to {args.model}")
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    if args.target is not None:
        data = load_csv(args.data, args.target)
        targets, features = data.targets, data.features
    else:
        targets, (features, _) = None, load_features_csv(args.data)
    predictions = model.predict(features)
    if targets is not None:
        write_prediction_dump(args.out, targets, predictions)
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "y_hat"])
            for i, p in enumerate(predictions):
                writer.writerow([i, repr(float(p))])
    print(f"{len(predictions)} predictions written to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    model = load_model(args.model)
    test = load_csv(args.data, args.target)
    predictions = model.predict(test.features)
    report = evaluate(model, test)
    pca_dim = model.pca_basis.shape[1] if model.pca_basis is not None else None
    row = BenchRow(model.learner_tag, model, report, predictions, pca_dim)
    config = {"model": str(args.model), "data": str(args.data),
              "target": str(args.target)}
    table = write_report(args.out, "eval", config, [row], test)
    print(table, end="")
    return 0


def _cmd_bench(args) -> int:
    train = load_csv(args.train, args.target)
    test = load_csv(args.test, args.target)
    cfg = _train_config(args)
    rows = run_bench(train, test, cfg, args.variance_threshold,
                     standardize=not args.no_standardize)
    config = {
        "train": str(args.train), "test": str(args.test), "target": str(args.target),
        "k": args.k, "sigma": args.sigma, "alpha": args.alpha, "mu": args.mu,
        "theta": args.theta, "max_iters": args.max_iters,
        "variance_threshold": args.variance_threshold,
        "standardize": not args.no_standardize, "seed": args.seed,
    }
    table = write_report(args.out, "bench", config, rows, test, save_models=True)
    print(table, end="")
    failed = [row.tag for row in rows if row.error is not None]
    if failed:
        print(f"failed learners: {', '.join(failed)}", file=sys.stderr)
    return 0


def _cmd_window(args) -> int:
    series = read_series(args.series)
    spec = SeriesSpec(lag_window=args.lag, horizon=args.horizon,
                      train_count=args.train_count)
    data = window_series(series, spec)
    if args.train_count is not None:
        train, test = split_prefix(data, args.train_count)
        stem, ext = os.path.splitext(args.out)
        train_path, test_path = f"{stem}_train{ext}", f"{stem}_test{ext}"
        save_csv(train, train_path, args.target_name)
        save_csv(test, test_path, args.target_name)
        print(f"{train.n} training and {test.n} test examples "
              f"(dim {data.dim}) written to {train_path}, {test_path}")
    else:
        save_csv(data, args.out, args.target_name)
        print(f"{data.n} examples of dimension {data.dim} written to {args.out}")
    return 0


def _cmd_tune(args) -> int:
    data = load_csv(args.data, args.target)
    std = Standardizer.identity(data.dim) if args.no_standardize else fit_standardizer(data)
    std_data = apply_standardizer(std, data)
    base = TrainConfig(alpha=args.alpha, mu=args.mu, theta=args.theta,
                       max_iters=args.max_iters,
                       kernel=KernelConfig(args.k, args.sigma), seed=args.seed)
    alphas = [float(v) for v in args.alphas.split(",") if v.strip()]
    mus = [float(v) for v in args.mus.split(",") if v.strip()]
    result = grid_search(std_data, alphas, mus, folds=args.folds,
                         seed=args.seed, base=base)
    lines = [f"{'alpha':>10}  {'mu':>10}  {'mean_rmse':>12}"]
    for cell in result.table:
        score = "FAILED" if cell.failed else f"{cell.mean_rmse:.6g}"
        lines.append(f"{cell.alpha:>10.4g}  {cell.mu:>10.4g}  {score:>12}")
    lines.append(f"best: alpha={result.best.alpha:g} mu={result.best.mu:g}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        document = {
            "schema_version": 1,
            "command": "tune",
            "best": {"alpha": result.best.alpha, "mu": result.best.mu},
            "table": [
                {"alpha": c.alpha, "mu": c.mu, "mean_rmse": c.mean_rmse,
                 "fold_rmses": list(c.fold_rmses), "error": c.error}
                for c in result.table
            ],
        }
        with open(os.path.join(args.out, "tune.json"), "w", encoding="utf-8") as fh:
            json.dump(document, fh, sort_keys=True, indent=2)
            fh.write("\n")
        with open(os.path.join(args.out, "tune.txt"), "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsekr",
        description="Kernel regression with learned sparse Mahalanobis metrics",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train", help="train one learner and save the model")
    p.add_argument("data", help="training CSV")
    p.add_argument("--target", required=True, help="target column name or index")
    p.add_argument("--learner", choices=sorted(LEARNER_CHOICES), default="kr_sml")
    p.add_argument("--model", required=True, help="output model path")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict targets for new feature rows")
    p.add_argument("data", help="input CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--target", default=None,
                   help="target column to strip from the input (kept in the dump)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="evaluate a saved model on a test CSV")
    p.add_argument("data", help="test CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="compare KR, MLKR, KR_PCA, KR_SML")
    p.add_argument("train", help="training CSV")
    p.add_argument("test", help="test CSV")
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True, help="report output directory")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("window", help="slide a window over a series CSV")
    p.add_argument("series", help="single-column CSV or newline-delimited numbers")
    p.add_argument("--lag", type=int, default=45, help="window length (default 45)")
    p.add_argument("--horizon", type=int, default=1, help="steps ahead (default 1)")
    p.add_argument("--train-count", type=int, default=None,
                   help="also split the windowed examples at this prefix")
    p.add_argument("--target-name", default="target")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_window)

    p = sub.add_parser("tune", help="grid-search alpha and mu by cross-validation")
    p.add_argument("data", help="training CSV")
    p.add_argument("--target", required=True)
    p.add_argument("--alphas", default="0.003,0.01,0.03",
                   help="comma-separated step sizes")
    p.add_argument("--mus", default="0,0.1,1.0",
                   help="comma-separated regularization weights")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--out", default=None, help="optional output directory")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_tune)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except SparsekrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
