"""Classification metrics: per-SNR accuracy, confusion matrices, and
one-vs-rest precision-recall curves with average precision.

AP is the step-wise sum sum_n (R_n - R_{n-1}) * P_n over the distinct
prediction scores in descending order; tied scores are processed as one
group, so the value is independent of the ordering of tied items.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import ConfigError


@dataclass
class SnrAccuracy:
    snr_db: int
    n: int
    accuracy: float


def accuracy_by_snr(preds, truths, snrs,
                    expected_snrs=None) -> tuple[list[SnrAccuracy], float]:
    """Per-SNR-bucket accuracy plus the overall accuracy.

    Buckets come from the SNRs present; if `expected_snrs` names a bucket
    with no samples it is omitted with a warning.
    """
    preds = np.asarray(preds)
    truths = np.asarray(truths)
    snrs = np.asarray(snrs)
    if not (len(preds) == len(truths) == len(snrs)):
        raise ConfigError("preds, truths and snrs must be aligned")
    if len(preds) == 0:
        raise ConfigError("no predictions to score")
    rows = []
    present = set()
    for snr in np.unique(snrs):
        mask = snrs == snr
        present.add(int(snr))
        rows.append(SnrAccuracy(int(snr), int(mask.sum()),
                                float((preds[mask] == truths[mask]).mean())))
    if expected_snrs is not None:
        for snr in expected_snrs:
            if int(snr) not in present:
                warnings.warn(f"no test frames at {snr} dB; bucket omitted")
    overall = float((preds == truths).mean())
    return rows, overall


def snr_accuracy_spearman(rows: list[SnrAccuracy]) -> float:
    """Spearman rank correlation between SNR and accuracy."""
    if len(rows) < 2:
        raise ConfigError("need at least two SNR buckets for a correlation")
    rho = stats.spearmanr([r.snr_db for r in rows],
                          [r.accuracy for r in rows]).statistic
    return float(rho)


@dataclass
class ConfusionMatrix:
    """Raw counts, rows = true class, columns = predicted class."""

    counts: np.ndarray
    snr_tag: str = "all"

    def row_normalized(self) -> np.ndarray:
        """Per-row normalization; the diagonal is the per-class TP ratio.

        Empty rows stay all-zero.
        """
        counts = self.counts.astype(np.float64)
        sums = counts.sum(axis=1, keepdims=True)
        out = np.zeros_like(counts)
        np.divide(counts, sums, out=out, where=sums > 0)
        return out

    def accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else float("nan")


def confusion_matrix(preds, truths, num_classes: int,
                     snr_tag: str = "all") -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    for name, arr in (("preds", preds), ("truths", truths)):
        if len(arr) and (arr.min() < 0 or arr.max() >= num_classes):
            raise ConfigError(f"{name} contain ids outside [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (truths, preds), 1)
    return ConfusionMatrix(counts, snr_tag)


@dataclass
class PrCurve:
    """Precision/recall at every distinct score threshold, descending."""

    class_id: int
    class_name: str = ""
    thresholds: np.ndarray = field(default_factory=lambda: np.zeros(0))
    precision: np.ndarray = field(default_factory=lambda: np.zeros(0))
    recall: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ap: float | None = None


def pr_curve_and_ap(scores, truths, class_id: int,
                    class_name: str = "") -> PrCurve:
    """One-vs-rest PR curve for `class_id` given per-sample scores.

    `scores` are the model's scores for this class; `truths` are the true
    class ids. If the class never occurs, AP is undefined (None).
    """
    scores = np.asarray(scores, dtype=np.float64)
    truths = np.asarray(truths)
    if not np.all(np.isfinite(scores)):
        raise ConfigError("scores must be finite")
    positive = (truths == class_id).astype(np.int64)
    n_pos = int(positive.sum())
    if n_pos == 0:
        return PrCurve(class_id, class_name, ap=None)
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    p_sorted = positive[order]
    tp_cum = np.cumsum(p_sorted)
    k = np.arange(1, len(scores) + 1)
    # group indices: last position of each run of equal scores
    last_of_group = np.nonzero(
        np.concatenate([s_sorted[1:] != s_sorted[:-1], [True]])
    )[0]
    thresholds = s_sorted[last_of_group]
    tp = tp_cum[last_of_group].astype(np.float64)
    predicted = k[last_of_group].astype(np.float64)
    precision = tp / predicted
    recall = tp / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    # sequential accumulation in threshold order (pairwise reduction would
    # drift from a direct reference by an ulp)
    ap = 0.0
    for term in ((recall - prev_recall) * precision).tolist():
        ap += term
    return PrCurve(class_id, class_name, thresholds, precision, recall, ap)
