from .metrics import (
    ConfusionMatrix,
    PrCurve,
    SnrAccuracy,
    accuracy_by_snr,
    confusion_matrix,
    pr_curve_and_ap,
    snr_accuracy_spearman,
)
from .report import (
    REFERENCE_COMPLEXITY,
    EvalReport,
    build_eval_report,
    complexity_report,
    emit_reports,
)

__all__ = [
    "ConfusionMatrix", "PrCurve", "SnrAccuracy", "accuracy_by_snr",
    "confusion_matrix", "pr_curve_and_ap", "snr_accuracy_spearman",
    "REFERENCE_COMPLEXITY", "EvalReport", "build_eval_report",
    "complexity_report", "emit_reports",
]
