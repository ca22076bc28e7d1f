"""Confusion-matrix statistics, ROC curves and AUC. Positive class = patient (+1)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

METRIC_NAMES = ("precision", "npv", "recall", "specificity", "mcc")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _pm1(a) -> np.ndarray:
    a = np.asarray(a)
    return np.where(a > 0, 1, -1)


def confusion(predictions, labels) -> ConfusionMatrix:
    p, y = np.asarray(predictions), np.asarray(labels)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {y.shape}")
    if p.size < 1:
        raise ValueError("need at least one prediction")
    p, y = _pm1(p) > 0, _pm1(y) > 0
    return ConfusionMatrix(
        tp=int(np.sum(p & y)), fp=int(np.sum(p & ~y)), tn=int(np.sum(~p & ~y)), fn=int(np.sum(~p & y))
    )


def overall_accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    return 100.0 * (cm.tp + cm.tn) / cm.total


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def summary_metrics(cm: ConfusionMatrix) -> dict[str, float | None]:
    """Precision, NPV, recall, specificity and MCC; None where undefined."""
    tp, fp, tn, fn = cm.tp, cm.fp, cm.tn, cm.fn
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    return {
        "precision": _ratio(tp, tp + fp),
        "npv": _ratio(tn, tn + fn),
        "recall": _ratio(tp, tp + fn),
        "specificity": _ratio(tn, tn + fp),
        "mcc": (tp * tn - fp * fn) / math.sqrt(den) if den else None,
    }


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_and_auc(scores, labels) -> RocCurve:
    """Threshold sweep over distinct scores, high to low; trapezoidal AUC.

    Tied scores move together as one step, which makes the area equal the
    Mann-Whitney statistic with ties counted as one half.
    """
    s = np.asarray(scores, dtype=float)
    y = _pm1(labels) > 0
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each group of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tps = np.cumsum(y)[ends]
    fps = (ends + 1) - tps
    tp = np.r_[0, tps]
    fp = np.r_[0, fps]
    # integer trapezoid sum, divided once at the end
    area2 = np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1]))
    auc = float(area2) / (2.0 * n_pos * n_neg)
    return RocCurve(fp / n_neg, tp / n_pos, np.r_[np.inf, s[ends]], auc)
