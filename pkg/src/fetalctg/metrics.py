"""Accuracy, confusion matrices and per-class recall."""
from __future__ import annotations

import csv
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from .dataset import CLASS_NAMES, CLASSES


def confusion(true, pred, classes=tuple(int(c) for c in CLASSES)) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    true = np.asarray(true)
    pred = np.asarray(pred)
    if true.shape != pred.shape:
        raise ValueError(f"length mismatch: {true.shape} vs {pred.shape}")
    if true.size == 0:
        raise ValueError("confusion matrix of zero samples")
    index = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(true.tolist(), pred.tolist()):
        cm[index[t], index[p]] += 1
    return cm


def accuracy(cm) -> float:
    """Fraction of the diagonal, as a percentage."""
    cm = np.asarray(cm)
    total = cm.sum()
    if total < 1:
        raise ValueError("accuracy of an empty confusion matrix")
    return float(100.0 * np.trace(cm) / total)


def recall(cm) -> np.ndarray:
    cm = np.asarray(cm, dtype=np.float64)
    rows = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(rows > 0, np.diag(cm) / rows, np.nan)


def round_half_up(value: float, places: int = 2) -> float:
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_UP))


def format_percent(value: float) -> str:
    return f"{round_half_up(value):.2f}"


def write_confusion_csv(cm, path, names=CLASS_NAMES) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\predicted"] + list(names))
        for name, row in zip(names, np.asarray(cm)):
            w.writerow([name] + [int(v) for v in row])


def read_confusion_csv(path) -> np.ndarray:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([[int(v) for v in r[1:]] for r in rows], dtype=np.int64)
