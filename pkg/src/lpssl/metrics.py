"""Accuracy, F1 and rank-statistic AUC-ROC."""

from dataclasses import dataclass, field
import logging
from typing import Any

import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import accuracy_score, f1_score

from .errors import SingleClassEval

logger = logging.getLogger(__name__)


@dataclass
class MetricsReport:
    accuracy: float
    f1: float
    auc_roc: float | None
    per_class_counts: list[int] = field(default_factory=list)

    def as_dict(self) -> dict[str, Any]:
        return {"accuracy": self.accuracy, "f1": self.f1, "auc_roc": self.auc_roc}


def binary_auc(scores: np.ndarray, positives: np.ndarray) -> float:
    """Mann-Whitney U / (n_pos * n_neg) with mid-ranks for tied scores.

    Equals the fraction of (positive, negative) pairs ordered correctly, ties
    counting one half.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = int(positives.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClassEval("AUC-ROC needs both positive and negative examples")
    ranks = rankdata(scores, method="average")
    u = ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_roc(labels: np.ndarray, scores: np.ndarray, num_classes: int) -> float:
    """Positive-class AUC for two classes, macro one-vs-rest otherwise.

    ``scores`` is ``(n,)`` positive-class scores or ``(n, C)`` per-class scores.
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if num_classes == 2:
        positive = scores[:, 1] if scores.ndim == 2 else scores
        return binary_auc(positive, labels == 1)

    present = [c for c in range(num_classes) if np.any(labels == c)]
    if len(present) < 2:
        raise SingleClassEval("AUC-ROC needs at least two classes present")
    return float(np.mean([binary_auc(scores[:, c], labels == c) for c in present]))


def compute_metrics(labels: np.ndarray, scores: np.ndarray, num_classes: int) -> MetricsReport:
    """Metrics of argmax predictions; AUC is ``None`` when only one class is present."""
    labels = np.asarray(labels, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    predictions = np.argmax(scores, axis=1)

    accuracy = float(accuracy_score(labels, predictions))
    if num_classes == 2:
        f1 = f1_score(labels, predictions, pos_label=1, average="binary", zero_division=0)
    else:
        f1 = f1_score(labels, predictions, labels=list(range(num_classes)), average="macro", zero_division=0)

    try:
        auc = auc_roc(labels, scores, num_classes)
    except SingleClassEval as e:
        logger.warning(f"AUC-ROC not reported: {str(e)}")
        auc = None

    counts = np.bincount(labels, minlength=num_classes)[:num_classes].tolist()
    return MetricsReport(accuracy=accuracy, f1=float(f1), auc_roc=auc, per_class_counts=counts)


__all__ = ["MetricsReport", "binary_auc", "auc_roc", "compute_metrics"]
