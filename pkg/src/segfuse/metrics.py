"""Binary classification metrics; the positive class is AI-generated (1).

Metrics that are undefined on a given split (AUC with one class present,
precision with no positive predictions, ...) are reported as None rather
than 0, so downstream consumers can tell "perfectly wrong" from "not
measurable".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


def auc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative.

    Rank (Mann-Whitney) formulation with average ranks, so ties count 1/2.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(f"scores {scores.shape} vs labels {labels.shape}")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = scores.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined with a single class")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None
    auc: float | None
    specificity: float | None
    tp: int
    fp: int
    tn: int
    fn: int

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f1": self.f1, "auc": self.auc,
                "specificity": self.specificity, "tp": self.tp, "fp": self.fp,
                "tn": self.tn, "fn": self.fn}


def compute_metrics(probs, labels) -> MetricsReport:
    """Score with threshold 0.5 on probabilities; AUC from the raw scores."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 1 or probs.shape != labels.shape or probs.size == 0:
        raise ValueError("probs and labels must be equal-length nonempty 1D arrays")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")

    preds = probs >= 0.5
    pos = labels == 1
    tp = int((preds & pos).sum())
    fp = int((preds & ~pos).sum())
    fn = int((~preds & pos).sum())
    tn = int((~preds & ~pos).sum())

    def ratio(num: int, den: int) -> float | None:
        return num / den if den > 0 else None

    precision = ratio(tp, tp + fp)
    recall = ratio(tp, tp + fn)
    f1 = None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    try:
        auc_value = auc(probs, labels)
    except ValueError:
        auc_value = None
    return MetricsReport(accuracy=(tp + tn) / probs.size, precision=precision,
                         recall=recall, f1=f1, auc=auc_value,
                         specificity=ratio(tn, tn + fp), tp=tp, fp=fp, tn=tn, fn=fn)
