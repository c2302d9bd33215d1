"""Evaluation metrics: one-vs-rest confusion counts, ROC/AUC, and the
treated-minus-baseline improvement comparator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class UndefinedAucError(ValueError):
    """AUC requested for a label vector with fewer than two classes."""


@dataclass(frozen=True)
class ClassCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ConfusionMatrix:
    """One-vs-rest 2x2 counts per class; every sample lands in every table."""

    per_class: dict[int, ClassCounts]
    n_samples: int


@dataclass(frozen=True)
class RocCurve:
    """Threshold-sweep curve from (0,0) to (1,1), monotone in both axes."""

    points: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    macro_auc: float
    micro_auc: float
    class_auc: dict[int, float]
    absent_classes: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_auc": self.macro_auc,
            "micro_auc": self.micro_auc,
            "class_auc": {str(c): v for c, v in sorted(self.class_auc.items())},
            "absent_classes": list(self.absent_classes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(
            accuracy=d["accuracy"],
            macro_auc=d["macro_auc"],
            micro_auc=d["micro_auc"],
            class_auc={int(c): v for c, v in d["class_auc"].items()},
            absent_classes=tuple(d.get("absent_classes", ())),
        )


def confusion(y_true, y_pred, n_classes: int | None = None) -> ConfusionMatrix:
    """One-vs-rest confusion counts for every class seen (or 0..n_classes-1)."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have equal length")
    if y_true.size == 0:
        raise ValueError("empty label vectors")
    if n_classes is None:
        classes = np.union1d(y_true, y_pred)
    else:
        classes = np.arange(n_classes)
    n = y_true.size
    per_class = {}
    for c in classes:
        tp = int(np.sum((y_true == c) & (y_pred == c)))
        fp = int(np.sum((y_true != c) & (y_pred == c)))
        fn = int(np.sum((y_true == c) & (y_pred != c)))
        per_class[int(c)] = ClassCounts(tp, fp, fn, n - tp - fp - fn)
    return ConfusionMatrix(per_class, n)


def tpr_fpr(counts: ClassCounts) -> tuple[float, float]:
    """Sensitivity and fall-out; degenerate 0/0 denominators map to 0."""
    tpr = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    fpr = counts.fp / (counts.fp + counts.tn) if counts.fp + counts.tn else 0.0
    return tpr, fpr


def roc_auc(scores, labels) -> tuple[RocCurve, float]:
    """ROC curve by descending-score threshold sweep, AUC by trapezoid.

    Tied scores collapse into a single threshold step, which credits half a
    pair per tie — the same convention as the pairwise ordering statistic.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    pos = int(labels.sum())
    neg = labels.size - pos
    if pos == 0 or neg == 0:
        raise UndefinedAucError("need at least one positive and one negative label")

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    l = labels[order]
    # one curve point after each group of equal scores
    boundary = np.nonzero(np.diff(s))[0]
    cut = np.concatenate([boundary, [s.size - 1]])
    tp_cum = np.cumsum(l)[cut]
    fp_cum = np.cumsum(1 - l)[cut]
    tpr = tp_cum / pos
    fpr = fp_cum / neg
    xs = np.concatenate([[0.0], fpr])
    ys = np.concatenate([[0.0], tpr])
    auc = float(np.trapz(ys, xs))
    curve = RocCurve(tuple((float(x), float(y)) for x, y in zip(xs, ys)))
    return curve, auc


def multiclass_auc(score_matrix, y_true) -> MetricReport:
    """One-vs-rest AUC aggregation plus argmax accuracy.

    macro is the unweighted mean over classes present in y_true; micro pools
    the flattened (sample, class) indicator set; classes missing from y_true
    are excluded from macro and listed in the report.
    """
    scores = np.asarray(score_matrix, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.int64)
    if scores.ndim != 2 or scores.shape[0] != y_true.size:
        raise ValueError("score matrix must be (n_samples, n_classes)")
    n, k = scores.shape
    present = np.unique(y_true)
    if present.size < 2:
        raise UndefinedAucError("need at least two classes in y_true")

    class_auc = {}
    for c in present:
        _, auc = roc_auc(scores[:, c], (y_true == c).astype(np.int64))
        class_auc[int(c)] = auc
    macro = float(np.mean(list(class_auc.values())))

    onehot = np.zeros((n, k), dtype=np.int64)
    onehot[np.arange(n), y_true] = 1
    _, micro = roc_auc(scores.ravel(), onehot.ravel())

    accuracy = float(np.mean(np.argmax(scores, axis=1) == y_true))
    absent = tuple(int(c) for c in range(k) if c not in set(present.tolist()))
    return MetricReport(accuracy, macro, micro, class_auc, absent)


def percent_improvement(m_syn: float, m_orig: float) -> float:
    """Treated-minus-baseline difference of the same metric on the same test set."""
    return m_syn - m_orig
