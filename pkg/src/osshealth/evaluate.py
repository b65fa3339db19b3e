"""Confusion matrices and the classification report table."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMatrix, LengthMismatch, UnknownLabel
from .features import LifecycleStage


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted
    labels: list        # class codes, row/column order

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class ClassRow:
    label: int
    precision: float
    recall: float
    f1: float
    support: int
    zero_division: bool = False  # precision or recall hit an empty denominator


@dataclass
class ClassificationReport:
    rows: list  # per-class ClassRow in label order
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    total: int

    def to_dict(self) -> dict:
        return {
            "classes": {
                str(r.label): {
                    "precision": r.precision,
                    "recall": r.recall,
                    "f1": r.f1,
                    "support": r.support,
                    "zero_division": r.zero_division,
                }
                for r in self.rows
            },
            "accuracy": self.accuracy,
            "macro_avg": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "weighted_avg": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
            },
            "total": self.total,
        }

    @property
    def macro_f1_score(self) -> float:
        return self.macro_f1


def confusion_matrix(y_true, y_pred, labels) -> ConfusionMatrix:
    y_true = list(y_true)
    y_pred = list(y_pred)
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} true vs {len(y_pred)} predicted")
    index = {int(l): i for i, l in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if int(t) not in index:
            raise UnknownLabel(f"true label {t} not in {list(labels)}")
        if int(p) not in index:
            raise UnknownLabel(f"predicted label {p} not in {list(labels)}")
        counts[index[int(t)], index[int(p)]] += 1
    return ConfusionMatrix(counts=counts, labels=[int(l) for l in labels])


def classification_report(m: ConfusionMatrix) -> ClassificationReport:
    """Per-class precision/recall/F1 plus accuracy, macro, and weighted
    averages. Empty denominators report 0 with a flag."""
    if m.total == 0:
        raise EmptyMatrix("confusion matrix has no entries")
    counts = m.counts.astype(np.float64)
    rows = []
    for i, label in enumerate(m.labels):
        tp = counts[i, i]
        col = counts[:, i].sum()
        row = counts[i, :].sum()
        zero = col == 0 or row == 0
        precision = tp / col if col > 0 else 0.0
        recall = tp / row if row > 0 else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall > 0 else 0.0)
        rows.append(ClassRow(label=label, precision=float(precision),
                             recall=float(recall), f1=float(f1),
                             support=int(row), zero_division=bool(zero)))
    supports = np.array([r.support for r in rows], dtype=np.float64)
    weights = supports / supports.sum()
    return ClassificationReport(
        rows=rows,
        accuracy=float(np.trace(counts) / m.total),
        macro_precision=float(np.mean([r.precision for r in rows])),
        macro_recall=float(np.mean([r.recall for r in rows])),
        macro_f1=float(np.mean([r.f1 for r in rows])),
        weighted_precision=float(np.dot(weights, [r.precision for r in rows])),
        weighted_recall=float(np.dot(weights, [r.recall for r in rows])),
        weighted_f1=float(np.dot(weights, [r.f1 for r in rows])),
        total=m.total,
    )


def report_from_dict(doc: dict) -> ClassificationReport:
    rows = [
        ClassRow(label=int(code), precision=entry["precision"], recall=entry["recall"],
                 f1=entry["f1"], support=entry["support"],
                 zero_division=entry.get("zero_division", False))
        for code, entry in sorted(doc["classes"].items(), key=lambda kv: int(kv[0]))
    ]
    return ClassificationReport(
        rows=rows,
        accuracy=doc["accuracy"],
        macro_precision=doc["macro_avg"]["precision"],
        macro_recall=doc["macro_avg"]["recall"],
        macro_f1=doc["macro_avg"]["f1"],
        weighted_precision=doc["weighted_avg"]["precision"],
        weighted_recall=doc["weighted_avg"]["recall"],
        weighted_f1=doc["weighted_avg"]["f1"],
        total=doc["total"],
    )


def _round2(x: float) -> str:
    # banker's rounding at two decimals, which is Python's default
    return f"{round(x, 2):.2f}"


def _stage_name(code: int) -> str:
    try:
        name = LifecycleStage(code).slug()
        return {"graduated": "grads"}.get(name, name)
    except ValueError:
        return str(code)


def render_report(r: ClassificationReport) -> str:
    """Fixed-width table: Class / Precision / Recall / F1-score / Support."""
    header = f"{'Class':<14}{'Precision':>10}{'Recall':>10}{'F1-score':>10}{'Support':>10}"
    lines = [header]
    for row in r.rows:
        lines.append(
            f"{_stage_name(row.label):<14}"
            f"{_round2(row.precision):>10}{_round2(row.recall):>10}"
            f"{_round2(row.f1):>10}{row.support:>10}"
        )
    lines.append("")
    lines.append(f"{'Accuracy':<14}{'':>10}{'':>10}{_round2(r.accuracy):>10}{r.total:>10}")
    lines.append(
        f"{'Macro avg':<14}{_round2(r.macro_precision):>10}"
        f"{_round2(r.macro_recall):>10}{_round2(r.macro_f1):>10}{r.total:>10}"
    )
    lines.append(
        f"{'Weighted avg':<14}{_round2(r.weighted_precision):>10}"
        f"{_round2(r.weighted_recall):>10}{_round2(r.weighted_f1):>10}{r.total:>10}"
    )
    return "\n".join(lines)
