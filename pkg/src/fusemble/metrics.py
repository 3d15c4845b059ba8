"""Evaluation metrics and summary tables for binary score vectors.

Conventions, fixed so results are bit-reproducible:

* ``roc_auc`` uses the pairwise (Mann-Whitney) definition: the probability
  that a uniformly random positive outranks a uniformly random negative,
  with ties counting 1/2.  It is computed from midranks, which gives the
  exact same float as brute-force pair counting.
* ``fmax`` sweeps thresholds drawn from the set of unique score values,
  predicts positive for ``score >= t``, computes F1 as
  ``2*tp / (2*tp + fp + fn)`` (0 when the denominator is 0), and returns
  the smallest maximizing threshold.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

SUMMARY_COLUMNS = [
    "name",
    "auc",
    "fmax",
    "fmax_threshold",
    "precision_at_fmax",
    "recall_at_fmax",
    "n_evaluated",
]


def _check_scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or labels.ndim != 1 or scores.shape != labels.shape:
        raise ValueError("scores and labels must be 1-D arrays of equal length")
    if not np.isfinite(scores).all():
        raise ValueError("scores contain non-finite values")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must contain only 0 and 1")
    labels = labels.astype(np.int64)
    if labels.min() == labels.max():
        raise ValueError("single-class labels: both classes must be present")
    return scores, labels


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve, pairwise definition with ties counting 1/2."""
    scores, labels = _check_scores_labels(scores, labels)
    # Midranks: tied values share the average of their 1-based sort positions.
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    midranks = (ends - (counts - 1) / 2.0)[inverse]
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    rank_sum = midranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _f1_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2 * tp / denom


def fmax(scores, labels) -> tuple[float, float]:
    """Maximum F1 over thresholds taken from the unique score values.

    Returns ``(fmax, threshold)`` where ``threshold`` is the smallest
    maximizer; samples with ``score >= threshold`` are predicted positive.
    """
    scores, labels = _check_scores_labels(scores, labels)
    best_f1 = -1.0
    best_t = None
    for t in np.unique(scores):
        pred = scores >= t
        tp = int(np.count_nonzero(pred & (labels == 1)))
        fp = int(np.count_nonzero(pred & (labels == 0)))
        fn = int(np.count_nonzero(~pred & (labels == 1)))
        f1 = _f1_from_counts(tp, fp, fn)
        if f1 > best_f1:
            best_f1 = f1
            best_t = float(t)
    return best_f1, best_t


def precision_recall_at(scores, labels, threshold: float) -> tuple[float, float]:
    """Precision and recall of ``score >= threshold``; 0/0 is defined as 0."""
    scores, labels = _check_scores_labels(scores, labels)
    pred = scores >= threshold
    tp = int(np.count_nonzero(pred & (labels == 1)))
    fp = int(np.count_nonzero(pred & (labels == 0)))
    fn = int(np.count_nonzero(~pred & (labels == 1)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return precision, recall


def build_summary(named_scores, labels) -> pd.DataFrame:
    """One metrics row per named score vector, sorted by AUC desc then name.

    ``named_scores`` is a mapping name -> score vector (or an iterable of
    ``(name, scores)`` pairs), every vector aligned with ``labels``.
    """
    if isinstance(named_scores, dict):
        items = list(named_scores.items())
    else:
        items = list(named_scores)
    rows = []
    for name, scores in items:
        auc = roc_auc(scores, labels)
        f, t = fmax(scores, labels)
        precision, recall = precision_recall_at(scores, labels, t)
        rows.append(
            {
                "name": str(name),
                "auc": auc,
                "fmax": f,
                "fmax_threshold": t,
                "precision_at_fmax": precision,
                "recall_at_fmax": recall,
                "n_evaluated": int(np.asarray(labels).size),
            }
        )
    table = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    if rows:
        table = table.sort_values(
            ["auc", "name"], ascending=[False, True], kind="mergesort"
        ).reset_index(drop=True)
    return table
