"""Ranking and thresholded detection metrics.

AUROC follows the Mann-Whitney convention: the probability that a random
anomaly outscores a random normal sample, with half credit for ties, which
equals the trapezoidal area under the grouped-threshold ROC curve.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError


def _split_scores(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ShapeError("scores and labels must be matching 1-D arrays")
    if not np.all(np.isin(labels, (0, 1))):
        raise DataError("labels must be binary")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise DataError("both classes must be present")
    return scores, labels.astype(np.int64), n_pos, n_neg


def _tie_averaged_ranks(scores):
    # 1-based ranks; tied values share the mean rank of their block.
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)))[:-1] + 1
    return (starts + (counts - 1) / 2.0)[inverse]


def auroc(scores, labels):
    """P(score_anomaly > score_normal) + half the tie probability."""
    scores, labels, n_pos, n_neg = _split_scores(scores, labels)
    ranks = _tie_averaged_ranks(scores)
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class RocCurve:
    """Grouped-threshold ROC points from (0, 0) to (1, 1), both nondecreasing."""

    fpr: np.ndarray
    tpr: np.ndarray

    def __post_init__(self):
        self.fpr = np.asarray(self.fpr, dtype=np.float64)
        self.tpr = np.asarray(self.tpr, dtype=np.float64)
        if self.fpr.shape != self.tpr.shape or self.fpr.ndim != 1 or self.fpr.size < 2:
            raise ShapeError("an ROC curve needs matching 1-D coordinate arrays")
        if self.fpr[0] != 0.0 or self.tpr[0] != 0.0 or self.fpr[-1] != 1.0 or self.tpr[-1] != 1.0:
            raise DataError("ROC endpoints must be exactly (0,0) and (1,1)")
        if np.any(np.diff(self.fpr) < 0) or np.any(np.diff(self.tpr) < 0):
            raise DataError("ROC coordinates must be nondecreasing")

    def area(self):
        return float(np.trapezoid(self.tpr, self.fpr))

    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_curve(scores, labels):
    """Threshold sweep over the unique score values, ties grouped."""
    scores, labels, n_pos, n_neg = _split_scores(scores, labels)
    thresholds = np.unique(scores)[::-1]
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    tpr = [0.0]
    fpr = [0.0]
    for t in thresholds:
        tpr.append(float(np.sum(pos >= t)) / n_pos)
        fpr.append(float(np.sum(neg >= t)) / n_neg)
    return RocCurve(np.asarray(fpr), np.asarray(tpr))


@dataclass
class ClassificationSummary:
    precision: float
    recall: float
    f1: float
    threshold: float


def prf_at_threshold(scores, labels, threshold):
    """Precision/recall/F1 predicting anomaly iff score >= threshold."""
    scores, labels, _, _ = _split_scores(scores, labels)
    pred = scores >= threshold
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return ClassificationSummary(precision, recall, f1, float(threshold))


def threshold_by_contamination(scores, contamination):
    """Threshold flagging ceil(contamination * n) samples, fewer on ties.

    When ties straddle the cutoff no threshold flags the exact count, so the
    next higher score group is used (flagging fewer, never more).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ShapeError("scores must be a nonempty 1-D array")
    if not (0.0 < contamination < 1.0):
        raise DataError("contamination must lie strictly between 0 and 1")
    k = int(np.ceil(contamination * scores.size))
    ordered = np.sort(scores)[::-1]
    candidate = ordered[k - 1]
    if int(np.sum(scores >= candidate)) == k:
        return float(candidate)
    higher = np.unique(scores)
    higher = higher[higher > candidate]
    if higher.size:
        return float(higher[0])
    return float(np.nextafter(candidate, np.inf))
