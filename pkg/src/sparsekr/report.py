"""Benchmark orchestration and report emission.

A report run produces, in the output directory:

* report.json           - schema-versioned machine-readable document
* report.txt            - aligned plain-text comparison table
* predictions_<TAG>.csv - per-point dump (index, y, y_hat), full precision
* model_<TAG>.json      - the trained model (bench only)
* comparison.png        - accumulated error and MARE bars across learners
* predictions_<TAG>.png - actual-vs-predicted overlay per learner

Every metric in report.json is recomputable from the prediction dumps, and
repeated runs with the same inputs and seed emit byte-identical documents.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .data import Dataset, Standardizer, apply_standardizer, fit_standardizer
from .errors import SparsekrError
from .evaluate import EvalReport, evaluate, save_model
from .learners import (
    TAG_KR,
    TAG_KR_PCA,
    TAG_KR_SML,
    TAG_MLKR,
    Model,
    TrainConfig,
    kr_train,
    krpca_train,
    krsml_train,
    mlkr_train,
)
from .metric import RANK_REL_TOL

REPORT_SCHEMA_VERSION = 1

BENCH_ORDER = (TAG_KR, TAG_MLKR, TAG_KR_PCA, TAG_KR_SML)


@dataclass(frozen=True)
class BenchRow:
    tag: str
    model: Model | None
    report: EvalReport | None
    predictions: np.ndarray | None
    pca_dim: int | None = None
    error: str | None = None


def run_bench(train: Dataset, test: Dataset, cfg: TrainConfig,
              variance_threshold: float = 0.95,
              standardize: bool = True) -> list[BenchRow]:
    """Train all four regressors on the same standardized split and score
    them on the test set. A learner that fails contributes an error row
    without affecting the others.
    """
    std = fit_standardizer(train) if standardize else Standardizer.identity(train.dim)
    std_train = apply_standardizer(std, train)

    def build(tag):
        if tag == TAG_KR:
            return kr_train(std_train, cfg.kernel, std), None
        if tag == TAG_MLKR:
            return mlkr_train(std_train, cfg, std)
        if tag == TAG_KR_PCA:
            return krpca_train(std_train, cfg, variance_threshold, std), None
        return krsml_train(std_train, cfg, std)

    rows = []
    for tag in BENCH_ORDER:
        try:
            model, trace = build(tag)
            predictions = model.predict(test.features)
            report = evaluate(model, test, trace)
            pca_dim = model.pca_basis.shape[1] if model.pca_basis is not None else None
            rows.append(BenchRow(tag, model, report, predictions, pca_dim))
        except SparsekrError as exc:
            rows.append(BenchRow(tag, None, None, None,
                                 error=f"{type(exc).__name__}: {exc}"))
    return rows


def _report_dict(row: BenchRow) -> dict:
    if row.error is not None:
        return {"learner_tag": row.tag, "error": row.error}
    r = row.report
    out = {
        "learner_tag": r.learner_tag,
        "rmse": r.rmse,
        "mare": r.mare,
        "accumulated_error": r.accumulated_error,
        "metric_rank": r.metric_rank,
        "original_dim": r.original_dim,
        "pca_dim": row.pca_dim,
        "n_test": r.n_test,
        "skipped_mare_points": r.skipped_mare_points,
    }
    if r.train_trace_summary is not None:
        s = r.train_trace_summary
        out["train_summary"] = {
            "final_loss": s.final_loss,
            "iterations": s.iterations,
            "accepted_steps": s.accepted_steps,
        }
    else:
        out["train_summary"] = None
    return out


def format_table(rows: list[BenchRow]) -> str:
    """Aligned text table, one line per learner."""
    header = ["learner", "rmse", "mare", "L", "rank", "dim", "pca_d", "n_test"]
    lines = [header]
    for row in rows:
        if row.error is not None:
            lines.append([row.tag, "FAILED: " + row.error, "", "", "", "", "", ""])
            continue
        r = row.report
        lines.append([
            row.tag,
            f"{r.rmse:.6g}",
            f"{r.mare:.6g}",
            f"{r.accumulated_error:.6g}",
            str(r.metric_rank),
            str(r.original_dim),
            str(row.pca_dim) if row.pca_dim is not None else "-",
            str(r.n_test),
        ])
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    rendered = []
    for line in lines:
        rendered.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
    return "\n".join(rendered) + "\n"


def write_prediction_dump(path, targets, predictions) -> None:
    """Per-point dump: every reported metric can be recomputed from this file."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "y", "y_hat"])
        for i, (y, p) in enumerate(zip(targets, predictions)):
            writer.writerow([i, repr(float(y)), repr(float(p))])


def render_prediction_figure(path, targets, predictions, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 4))
    idx = np.arange(len(targets))
    ax.plot(idx, targets, lw=1.0, color="tab:blue", label="actual")
    ax.plot(idx, predictions, ".", ms=4, color="tab:red", label="predicted")
    ax.set_xlabel("test example")
    ax.set_ylabel("target")
    ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_comparison_figure(path, rows: list[BenchRow]) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ok = [row for row in rows if row.report is not None]
    if not ok:
        return
    tags = [row.tag for row in ok]
    fig, (ax_l, ax_m) = plt.subplots(1, 2, figsize=(9, 4))
    ax_l.bar(tags, [row.report.accumulated_error for row in ok], color="tab:blue")
    ax_l.set_ylabel("accumulated error L")
    ax_l.set_title("test accumulated error")
    ax_m.bar(tags, [row.report.mare for row in ok], color="tab:orange")
    ax_m.set_ylabel("MARE")
    ax_m.set_title("test MARE")
    for ax in (ax_l, ax_m):
        ax.tick_params(axis="x", labelrotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(out_dir, command: str, config: dict, rows: list[BenchRow],
                 test: Dataset, save_models: bool = False,
                 make_figures: bool = True) -> str:
    """Emit the full report bundle; returns the rendered text table."""
    os.makedirs(out_dir, exist_ok=True)
    config = dict(config)
    config.setdefault("rank_rel_tol", RANK_REL_TOL)
    document = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": command,
        "config": config,
        "results": [_report_dict(row) for row in rows],
    }
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(document, fh, sort_keys=True, indent=2)
        fh.write("\n")

    table = format_table(rows)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)

    for row in rows:
        if row.predictions is None:
            continue
        write_prediction_dump(
            os.path.join(out_dir, f"predictions_{row.tag}.csv"),
            test.targets, row.predictions,
        )
        if save_models and row.model is not None:
            save_model(row.model, os.path.join(out_dir, f"model_{row.tag}.json"))
        if make_figures:
            render_prediction_figure(
                os.path.join(out_dir, f"predictions_{row.tag}.png"),
                test.targets, row.predictions, row.tag,
            )
    if make_figures and len(rows) > 1:
        render_comparison_figure(os.path.join(out_dir, "comparison.png"), rows)
    return table
