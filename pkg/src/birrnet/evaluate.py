"""Accuracy and confusion-matrix evaluation over a labeled split."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Entry, load_item
from .errors import ConfigError, ItemLoadError
from .model import Model


@dataclass
class ConfusionMatrix:
    """counts[true class, predicted class]."""

    counts: np.ndarray

    @classmethod
    def empty(cls, num_classes: int) -> "ConfusionMatrix":
        return cls(np.zeros((num_classes, num_classes), dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total)

    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)


@dataclass
class Metrics:
    accuracy: float
    precision: list[float]
    recall: list[float]
    evaluated: int
    failures: list[str] = field(default_factory=list)


def confusion_from_predictions(true_ids, pred_ids, num_classes: int) -> ConfusionMatrix:
    matrix = ConfusionMatrix.empty(num_classes)
    for t, p in zip(true_ids, pred_ids):
        matrix.counts[int(t), int(p)] += 1
    return matrix


def metrics_from_matrix(matrix: ConfusionMatrix,
                        failures: list[str] | None = None) -> Metrics:
    counts = matrix.counts
    diag = np.diag(counts).astype(np.float64)
    col = counts.sum(axis=0).astype(np.float64)
    row = counts.sum(axis=1).astype(np.float64)
    precision = [float(diag[i] / col[i]) if col[i] else 0.0 for i in range(len(diag))]
    recall = [float(diag[i] / row[i]) if row[i] else 0.0 for i in range(len(diag))]
    return Metrics(accuracy=matrix.accuracy(), precision=precision, recall=recall,
                   evaluated=matrix.total, failures=list(failures or []))


def evaluate(model: Model, entries: list[Entry], root,
             resolution: int | None = None,
             batch_size: int = 32) -> tuple[Metrics, ConfusionMatrix]:
    """Inference-mode evaluation of every entry.

    Predictions take the argmax probability; exact ties resolve to the lowest
    class id. Undecodable images are excluded from the counts and reported on
    ``Metrics.failures``.
    """
    if not entries:
        raise ConfigError("cannot evaluate an empty entry list")
    res = resolution if resolution is not None else model.config.input_resolution
    num_classes = model.config.num_classes
    matrix = ConfusionMatrix.empty(num_classes)
    failures: list[str] = []

    pending: list[tuple[np.ndarray, int]] = []

    def flush():
        if not pending:
            return
        batch = np.concatenate([x for x, _ in pending], axis=0)
        _, probs = model.forward(batch, train=False)
        preds = probs.reshape(len(pending), -1).argmax(axis=1)
        for (_, true_id), pred in zip(pending, preds):
            matrix.counts[true_id, int(pred)] += 1
        pending.clear()

    for entry in entries:
        try:
            tensor = load_item(root, entry, res)
        except ItemLoadError as exc:
            failures.append(str(exc))
            continue
        pending.append((tensor, entry[1]))
        if len(pending) >= batch_size:
            flush()
    flush()
    if matrix.total == 0:
        raise ConfigError("no entry could be evaluated; all decodes failed")
    return metrics_from_matrix(matrix, failures), matrix


def render_confusion(matrix: ConfusionMatrix, labels) -> str:
    """Aligned text table: class codes on both axes plus marginal totals."""
    codes = [lab.code for lab in sorted(labels, key=lambda lab: lab.id)]
    n = len(codes)
    if matrix.counts.shape != (n, n):
        raise ConfigError(
            f"matrix shape {matrix.counts.shape} does not match {n} labels")
    col_totals = matrix.col_totals()
    row_totals = matrix.row_totals()
    header = ["true\\pred", *codes, "total"]
    rows = [header]
    for i, code in enumerate(codes):
        rows.append([code, *[str(int(v)) for v in matrix.counts[i]],
                     str(int(row_totals[i]))])
    rows.append(["total", *[str(int(v)) for v in col_totals], str(matrix.total)])
    widths = [max(len(row[c]) for row in rows) for c in range(len(header))]
    lines = ["  ".join(cell.rjust(widths[c]) for c, cell in enumerate(row))
             for row in rows]
    return "\n".join(lines)


def write_confusion_csv(matrix: ConfusionMatrix, labels, path) -> None:
    codes = [lab.code for lab in sorted(labels, key=lambda lab: lab.id)]
    lines = ["true\\pred," + ",".join(codes)]
    for i, code in enumerate(codes):
        lines.append(code + "," + ",".join(str(int(v)) for v in matrix.counts[i]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
