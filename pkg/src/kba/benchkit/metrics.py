"""Support-weighted routing metrics.

Failed routes are labelled ``FAIL_LABEL``; they count against the expected
agent's recall and appear as an extra confusion-matrix column, but never
enter any agent's precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.metrics import accuracy_score, confusion_matrix, precision_recall_fscore_support

from ..orchestrator import FAIL_LABEL


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    labels: tuple[str, ...]
    columns: tuple[str, ...]
    confusion: np.ndarray

    def confusion_csv(self) -> str:
        lines = ["expected," + ",".join(self.columns)]
        for label, row in zip(self.labels, self.confusion):
            lines.append(label + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def classification_metrics(
    y_true: Sequence[str], y_pred: Sequence[str], labels: Sequence[str] | None = None
) -> ClassificationMetrics:
    if len(y_true) != len(y_pred):
        raise ValueError("y_true and y_pred differ in length")
    if labels is None:
        labels = sorted(set(y_true))
    labels = list(labels)
    extra = sorted(set(y_pred) - set(labels) - {FAIL_LABEL})
    columns = labels + extra + [FAIL_LABEL]
    if not y_true:
        return ClassificationMetrics(
            0.0, 0.0, 0.0, 0.0, tuple(labels), tuple(columns), np.zeros((len(labels), len(columns)), int)
        )
    y_true, y_pred = list(y_true), list(y_pred)
    precision, recall, f1, _ = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average="weighted", zero_division=0
    )
    full = confusion_matrix(y_true, y_pred, labels=columns)
    return ClassificationMetrics(
        float(accuracy_score(y_true, y_pred)),
        float(precision),
        float(recall),
        float(f1),
        tuple(labels),
        tuple(columns),
        full[: len(labels)],
    )
