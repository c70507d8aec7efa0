"""Binary-classification evaluation: confusion matrix, per-class report,
ROC curve and AUC.  Class 1 (fall) is the positive class throughout."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidInputError


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    fp: int
    fn: int
    tp: int

    def __post_init__(self):
        for name in ("tn", "fp", "fn", "tp"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp


def confusion(labels, predictions) -> ConfusionMatrix:
    y = np.asarray(labels)
    p = np.asarray(predictions)
    if y.shape != p.shape or y.ndim != 1 or y.size < 1:
        raise InvalidInputError(f"labels {y.shape} and predictions {p.shape} must be equal-length vectors")
    if not (np.isin(y, (0, 1)).all() and np.isin(p, (0, 1)).all()):
        raise InvalidInputError("labels and predictions must be binary (0/1)")
    return ConfusionMatrix(
        tn=int(((y == 0) & (p == 0)).sum()),
        fp=int(((y == 0) & (p == 1)).sum()),
        fn=int(((y == 1) & (p == 0)).sum()),
        tp=int(((y == 1) & (p == 1)).sum()),
    )


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


@dataclass(frozen=True)
class ClassReport:
    class0: ClassMetrics
    class1: ClassMetrics
    specificity: float
    sensitivity: float
    accuracy: float
    confusion: ConfusionMatrix

    def to_dict(self) -> dict:
        return {
            "confusion": {"tn": self.confusion.tn, "fp": self.confusion.fp,
                          "fn": self.confusion.fn, "tp": self.confusion.tp},
            "class0": {"precision": self.class0.precision, "recall": self.class0.recall,
                       "f1": self.class0.f1, "degenerate": self.class0.degenerate},
            "class1": {"precision": self.class1.precision, "recall": self.class1.recall,
                       "f1": self.class1.f1, "degenerate": self.class1.degenerate},
            "specificity": self.specificity,
            "sensitivity": self.sensitivity,
            "accuracy": self.accuracy,
        }

    def format_table(self) -> str:
        rows = [
            ("class", "precision", "recall", "f1"),
            ("non-fall (0)", *(percent_str(v) for v in
                               (self.class0.precision, self.class0.recall, self.class0.f1))),
            ("fall (1)", *(percent_str(v) for v in
                           (self.class1.precision, self.class1.recall, self.class1.f1))),
        ]
        widths = [max(len(r[c]) for r in rows) for c in range(4)]
        lines = ["  ".join(r[c].ljust(widths[c]) for c in range(4)) for r in rows]
        lines.append("")
        lines.append(f"sensitivity {percent_str(self.sensitivity)}   "
                     f"specificity {percent_str(self.specificity)}   "
                     f"accuracy {self.accuracy * 100:.2f}%")
        cm = self.confusion
        lines.append(f"confusion: tn={cm.tn} fp={cm.fp} fn={cm.fn} tp={cm.tp}")
        return "\n".join(lines)


def percent(x: float) -> int:
    """Whole-percent rounding, half away from zero (97.5 -> 98)."""
    return int(math.floor(x * 100.0 + 0.5))


def percent_str(x: float) -> str:
    return f"{percent(x)}%"


def _ratio(num: int, den: int):
    if den == 0:
        return 0.0, True
    return num / den, False


def report(cm: ConfusionMatrix) -> ClassReport:
    """Per-class precision/recall/F1 plus specificity, sensitivity, accuracy.

    Zero denominators yield 0.0 with the class flagged degenerate.
    """
    if cm.total == 0:
        raise InvalidInputError("cannot build a report from an empty confusion matrix")
    p0, d0p = _ratio(cm.tn, cm.tn + cm.fn)
    r0, d0r = _ratio(cm.tn, cm.tn + cm.fp)
    p1, d1p = _ratio(cm.tp, cm.tp + cm.fp)
    r1, d1r = _ratio(cm.tp, cm.tp + cm.fn)
    f0, d0f = (0.0, True) if p0 + r0 == 0 else (2 * p0 * r0 / (p0 + r0), False)
    f1, d1f = (0.0, True) if p1 + r1 == 0 else (2 * p1 * r1 / (p1 + r1), False)
    return ClassReport(
        class0=ClassMetrics(p0, r0, f0, d0p or d0r or d0f),
        class1=ClassMetrics(p1, r1, f1, d1p or d1r or d1f),
        specificity=r0,
        sensitivity=r1,
        accuracy=(cm.tn + cm.tp) / cm.total,
        confusion=cm,
    )


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    fpr: float
    tpr: float


def roc(labels, scores) -> list:
    """ROC points, one per distinct score plus the (0, 0) endpoint.

    A point at threshold s uses the decision rule score >= s; tied scores
    collapse into a single step.  Points come out sorted by FPR (and TPR)
    non-decreasing, starting at (0, 0) and ending at (1, 1).
    """
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1 or y.size < 1:
        raise InvalidInputError("labels and scores must be equal-length vectors")
    if not np.isfinite(s).all():
        raise InvalidInputError("scores must be finite")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInputError("ROC needs both classes present")

    order = np.argsort(-s, kind="stable")
    points = [RocPoint(math.inf, 0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < y.size:
        j = i
        thr = s[order[i]]
        while j < y.size and s[order[j]] == thr:
            if y[order[j]] == 1:
                tp += 1
            else:
                fp += 1
            j += 1
        points.append(RocPoint(float(thr), fp / n_neg, tp / n_pos))
        i = j
    return points


def auc(points) -> float:
    """Trapezoidal area under the ROC curve over FPR."""
    total = 0.0
    for a, b in zip(points[:-1], points[1:]):
        total += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0
    return total


def roc_to_csv(points, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "fpr", "tpr"])
        for p in points:
            writer.writerow([p.threshold, p.fpr, p.tpr])
