"""Confusion-matrix metrics and report serialization."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class MetricsReport:
    classes: list
    confusion: list                     # K x K ints, rows = truth, cols = prediction
    accuracy: float
    precision: list
    recall: list
    f1: list
    macro_precision: float
    macro_recall: float
    macro_f1: float
    degenerate: list = field(default_factory=list)  # metrics whose denominator was 0
    history: list = field(default_factory=list)     # per-epoch dicts

    def to_dict(self):
        return {
            "classes": list(self.classes),
            "confusion": [list(map(int, row)) for row in self.confusion],
            "accuracy": self.accuracy,
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": list(self.f1),
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "degenerate": list(self.degenerate),
            "history": [dict(h) for h in self.history],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def __eq__(self, other):
        return isinstance(other, MetricsReport) and self.to_dict() == other.to_dict()


def compute_metrics(truth, pred, classes):
    """Build a MetricsReport from integer label pairs.

    accuracy = trace/N; precision_k = cm[k,k]/col_k; recall_k = cm[k,k]/row_k;
    f1 the harmonic mean. Zero denominators yield 0 and are flagged.
    """
    k = len(classes)
    cm = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(truth, pred):
        cm[t, p] += 1
    n = int(cm.sum())
    accuracy = float(np.trace(cm) / n) if n else 0.0
    precision, recall, f1, degenerate = [], [], [], []
    for i in range(k):
        col = int(cm[:, i].sum())
        row = int(cm[i, :].sum())
        if col == 0:
            degenerate.append(f"precision[{classes[i]}]")
        if row == 0:
            degenerate.append(f"recall[{classes[i]}]")
        p = cm[i, i] / col if col else 0.0
        r = cm[i, i] / row if row else 0.0
        if p + r == 0.0:
            degenerate.append(f"f1[{classes[i]}]")
        precision.append(float(p))
        recall.append(float(r))
        f1.append(float(2 * p * r / (p + r)) if p + r else 0.0)
    return MetricsReport(
        classes=list(classes),
        confusion=cm.tolist(),
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        macro_precision=float(np.mean(precision)),
        macro_recall=float(np.mean(recall)),
        macro_f1=float(np.mean(f1)),
        degenerate=degenerate,
    )


def subset_accuracy(truth, pred, class_indices):
    """Accuracy restricted to samples whose true class is in class_indices."""
    pairs = [(t, p) for t, p in zip(truth, pred) if t in class_indices]
    if not pairs:
        return 0.0
    return sum(1 for t, p in pairs if t == p) / len(pairs)


def export_report(report, base_path):
    """Write {base}.json, {base}_history.csv, {base}_confusion.csv."""
    base = str(base_path)
    with open(base + ".json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    with open(base + "_history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_acc", "val_acc", "train_loss"])
        for h in report.history:
            writer.writerow([h["epoch"], h["train_acc"], h["val_acc"], h["train_loss"]])
    with open(base + "_confusion.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["truth\\pred"] + list(report.classes))
        for name, row in zip(report.classes, report.confusion):
            writer.writerow([name] + list(row))
    return base + ".json"


def load_report(path):
    with open(path) as fh:
        return MetricsReport.from_dict(json.load(fh))
