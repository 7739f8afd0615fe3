"""
Detection and Classification Metrics

Binary precision/recall at a threshold, the precision-recall curve and its
step-wise area (average precision), and one-vs-rest per-class reports with
macro and worst-class summaries.
"""

from typing import List, Sequence, Tuple

import numpy as np
from sklearn.metrics import (
    average_precision_score,
    precision_recall_curve,
    precision_recall_fscore_support,
    roc_auc_score,
)

from src.errors import ShapeError, UndefinedMetricError
from src.models import ClassificationReport, ClassMetrics, DetectionMetrics
from src.utils import get_logger

logger = get_logger(__name__)


def _binary_inputs(truth: Sequence[bool], scores: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(truth, dtype=bool)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise ShapeError(f"truth {y.shape} and scores {s.shape} differ in shape")
    if not y.any():
        raise UndefinedMetricError("Precision/recall need at least one positive in truth")
    return y, s


def precision_recall(
    truth: Sequence[bool], scores: Sequence[float], threshold: float
) -> Tuple[float, float]:
    """
    Precision and recall of `scores >= threshold`.

    Precision is 0.0 when nothing is predicted positive.
    """
    y, s = _binary_inputs(truth, scores)
    predicted = s >= threshold
    true_positive = int(np.sum(predicted & y))
    n_predicted = int(predicted.sum())
    precision = true_positive / n_predicted if n_predicted else 0.0
    return precision, true_positive / int(y.sum())


def pr_curve(truth: Sequence[bool], scores: Sequence[float]) -> List[Tuple[float, float, float]]:
    """(threshold, precision, recall) at each distinct score, highest threshold first."""
    y, s = _binary_inputs(truth, scores)
    precision, recall, thresholds = precision_recall_curve(y, s)
    # sklearn appends a final (precision=1, recall=0) point with no threshold
    rows = [
        (float(t), float(p), float(r))
        for t, p, r in zip(thresholds, precision[:-1], recall[:-1])
    ]
    return sorted(rows, key=lambda row: -row[0])


def pr_auc(truth: Sequence[bool], scores: Sequence[float]) -> float:
    """Average precision: sum over thresholds of precision * recall increment."""
    y, s = _binary_inputs(truth, scores)
    return float(average_precision_score(y, s))


def detection_metrics(
    truth: Sequence[bool], scores: Sequence[float], threshold: float
) -> DetectionMetrics:
    precision, recall = precision_recall(truth, scores, threshold)
    y = np.asarray(truth, dtype=bool)
    return DetectionMetrics(
        precision=precision,
        recall=recall,
        pr_auc=pr_auc(truth, scores),
        threshold=threshold,
        n_positive=int(y.sum()),
        n_negative=int((~y).sum()),
    )


def classification_report(
    truth: Sequence[str],
    predicted: Sequence[str],
    scores: np.ndarray,
    classes: Sequence[str],
) -> ClassificationReport:
    """
    One-vs-rest precision, recall and ROC AUC per class.

    Args:
        truth: true label per example
        predicted: predicted label per example
        scores: [n, len(classes)] class probabilities, columns in `classes` order
        classes: the classifier's class list

    Classes with no example in `truth` are excluded (with a warning).

    Raises:
        UndefinedMetricError: fewer than 2 classes present in truth
    """
    truth_arr = np.asarray(list(truth), dtype=object)
    predicted_arr = np.asarray(list(predicted), dtype=object)
    scores = np.asarray(scores, dtype=np.float64)
    if truth_arr.shape != predicted_arr.shape or scores.shape != (len(truth_arr), len(classes)):
        raise ShapeError(
            f"classification_report shapes: truth {truth_arr.shape}, predicted "
            f"{predicted_arr.shape}, scores {scores.shape} for {len(classes)} classes"
        )
    present = [label for label in classes if np.any(truth_arr == label)]
    excluded = [label for label in classes if label not in present]
    if excluded:
        logger.warning("classes_absent_from_truth", excluded=excluded)
    if len(present) < 2:
        raise UndefinedMetricError(
            f"Classification report needs at least 2 classes in truth, found {len(present)}"
        )

    precision, recall, _, support = precision_recall_fscore_support(
        truth_arr, predicted_arr, labels=present, zero_division=0
    )
    column = {label: i for i, label in enumerate(classes)}
    per_class = {}
    for i, label in enumerate(present):
        positives = truth_arr == label
        per_class[label] = ClassMetrics(
            precision=float(precision[i]),
            recall=float(recall[i]),
            auc=float(roc_auc_score(positives, scores[:, column[label]])),
            support=int(support[i]),
        )

    values = list(per_class.values())
    macro = ClassMetrics(
        precision=float(np.mean([m.precision for m in values])),
        recall=float(np.mean([m.recall for m in values])),
        auc=float(np.mean([m.auc for m in values])),
        support=int(sum(m.support for m in values)),
    )
    minimum = ClassMetrics(
        precision=min(m.precision for m in values),
        recall=min(m.recall for m in values),
        auc=min(m.auc for m in values),
        support=min(m.support for m in values),
    )
    return ClassificationReport(
        per_class=per_class, macro=macro, minimum=minimum, excluded_classes=excluded
    )
