"""Evaluation report assembly and file emission.

Outputs (all deterministic given the same inputs):

    accuracy_by_snr.csv     snr_db, n, accuracy (one row per test SNR)
    pr_<class>.csv          threshold, precision, recall
    confusion_<snr>.json    counts + row-normalized view (+ confusion_all)
    complexity.json         parameter counts, manifest bytes, timing

Optional SVG renderings of the CSV data are produced when requested and
matplotlib is available.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..model.network import Model
from ..signal.dataset import SignalDataset
from ..training.loop import evaluate
from ..signal.frames import quad_views_batch
from .metrics import (
    ConfusionMatrix,
    PrCurve,
    SnrAccuracy,
    accuracy_by_snr,
    confusion_matrix,
    pr_curve_and_ap,
    snr_accuracy_spearman,
)

# Published full-width complexity figures for this architecture family,
# reported as annotations only (never asserted: timing is hardware-bound).
REFERENCE_COMPLEXITY = {
    "qsla": {"memory_kb": 2502, "trainable_parameters_k": 615,
             "seconds_per_epoch": 96},
    "only-attention": {"memory_kb": 1274, "trainable_parameters_k": 302,
                       "seconds_per_epoch": 45},
    "only-bilstm": {"memory_kb": 3982, "trainable_parameters_k": 993,
                    "seconds_per_epoch": 170},
}


@dataclass
class EvalReport:
    class_names: tuple[str, ...]
    snr_accuracy: list[SnrAccuracy]
    overall_accuracy: float
    confusions: dict[str, ConfusionMatrix]
    pr_curves: list[PrCurve]
    complexity: dict
    fingerprint: str
    spearman_snr_accuracy: float | None = None


def complexity_block(model: Model, epoch_seconds=None) -> dict:
    """Parameter/memory accounting plus optional measured epoch timing."""
    counts = model.count_params()
    block = {
        "variant": model.variant,
        "width_scale": model.config.width_scale,
        "trainable_parameters": counts.total,
        "trainable_parameters_excluding_batchnorm": counts.total_without_bn,
        "per_layer_parameters": dict(counts.per_layer),
        "manifest_bytes": model.memory_footprint(),
        "seconds_per_epoch_median": (
            float(np.median(epoch_seconds)) if epoch_seconds else None
        ),
    }
    ref = REFERENCE_COMPLEXITY.get(model.variant)
    if ref is not None and model.config.width_scale == 1.0:
        block["reference_full_width"] = ref
    return block


def complexity_report(model: Model, epoch_seconds=None) -> dict:
    return complexity_block(model, epoch_seconds)


def build_eval_report(model: Model, ds: SignalDataset, batch_size: int = 256,
                      epoch_seconds=None, snr_filter=None) -> EvalReport:
    """Evaluate the test split and assemble every reported metric family."""
    if ds.split is None:
        raise DataError("dataset has no split; cannot locate the test set")
    if model.config.num_classes != len(ds.meta.class_names):
        raise DataError(
            f"manifest was built for {model.config.num_classes} classes but the"
            f" dataset has {len(ds.meta.class_names)}"
        )
    idx = np.asarray(ds.split.test, dtype=np.int64)
    iq, labels, snrs = ds.iq[idx], ds.labels[idx].astype(np.int64), ds.snrs[idx]
    views = quad_views_batch(iq.astype(np.float32))
    _, _, probs = evaluate(model, views, labels, batch_size)
    preds = probs.argmax(axis=1)

    rows, overall = accuracy_by_snr(preds, labels, snrs,
                                    expected_snrs=ds.meta.snr_grid)
    n_classes = len(ds.meta.class_names)
    confusions = {"all": confusion_matrix(preds, labels, n_classes, "all")}
    snr_tags = [int(s) for s in np.unique(snrs)]
    if snr_filter is not None:
        snr_tags = [s for s in snr_tags if s in set(snr_filter)]
    for snr in snr_tags:
        mask = snrs == snr
        confusions[str(snr)] = confusion_matrix(preds[mask], labels[mask],
                                                n_classes, str(snr))
    pr_curves = [
        pr_curve_and_ap(probs[:, c], labels, c, ds.meta.class_names[c])
        for c in range(n_classes)
    ]
    rho = snr_accuracy_spearman(rows) if len(rows) >= 2 else None
    return EvalReport(
        class_names=tuple(ds.meta.class_names),
        snr_accuracy=rows,
        overall_accuracy=overall,
        confusions=confusions,
        pr_curves=pr_curves,
        complexity=complexity_block(model, epoch_seconds),
        fingerprint=model.fingerprint,
        spearman_snr_accuracy=rho,
    )


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row))
    path.write_text("\n".join(lines) + "\n")


def emit_reports(report: EvalReport, out_dir, plots: bool = False) -> list[Path]:
    """Write the CSV/JSON suite (and optional SVGs); returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    acc_path = out_dir / "accuracy_by_snr.csv"
    _write_csv(acc_path, ["snr_db", "n", "accuracy"],
               [(r.snr_db, r.n, r.accuracy) for r in report.snr_accuracy])
    written.append(acc_path)

    for curve in report.pr_curves:
        path = out_dir / f"pr_{curve.class_name or curve.class_id}.csv"
        if curve.ap is None:
            path.write_text("threshold,precision,recall\n")
        else:
            _write_csv(path, ["threshold", "precision", "recall"],
                       zip(curve.thresholds.tolist(), curve.precision.tolist(),
                           curve.recall.tolist()))
        written.append(path)

    for tag, cm in sorted(report.confusions.items()):
        path = out_dir / f"confusion_{tag}.json"
        path.write_text(json.dumps(
            {
                "snr": tag,
                "class_names": list(report.class_names),
                "counts": cm.counts.tolist(),
                "row_normalized": cm.row_normalized().tolist(),
                "accuracy": cm.accuracy(),
            },
            indent=2, sort_keys=True) + "\n")
        written.append(path)

    summary = dict(report.complexity)
    summary["overall_accuracy"] = report.overall_accuracy
    summary["spearman_snr_accuracy"] = report.spearman_snr_accuracy
    summary["average_precision"] = {
        c.class_name or str(c.class_id): c.ap for c in report.pr_curves
    }
    summary["fingerprint"] = report.fingerprint
    cx_path = out_dir / "complexity.json"
    cx_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(cx_path)

    if plots:
        written.extend(_emit_plots(report, out_dir))
    return written


def _emit_plots(report: EvalReport, out_dir: Path) -> list[Path]:
    try:
        import matplotlib
        matplotlib.use("SVG")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise DataError("plots requested but matplotlib is unavailable") from exc
    written = []

    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot([r.snr_db for r in report.snr_accuracy],
            [r.accuracy for r in report.snr_accuracy], marker="o")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.4)
    path = out_dir / "accuracy_by_snr.svg"
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(4.4, 4))
    cm = report.confusions["all"].row_normalized()
    ax.imshow(cm, cmap="Blues", vmin=0, vmax=1)
    ax.set_xticks(range(len(report.class_names)))
    ax.set_yticks(range(len(report.class_names)))
    ax.set_xticklabels(report.class_names, rotation=90, fontsize=7)
    ax.set_yticklabels(report.class_names, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    path = out_dir / "confusion_all.svg"
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 3.8))
    for curve in report.pr_curves:
        if curve.ap is not None:
            ax.plot(curve.recall, curve.precision,
                    label=f"{curve.class_name} (AP={curve.ap:.2f})")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.legend(fontsize=6)
    ax.grid(True, alpha=0.4)
    path = out_dir / "pr_curves.svg"
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written
