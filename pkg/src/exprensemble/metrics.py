"""Confusion matrix, per-class F1 and the 8-class macro-F1 challenge score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CLASS_NAMES, NUM_CLASSES, ValidationError


def _as_labels(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64).reshape(-1)
    if len(arr) and (arr.min() < 0 or arr.max() >= NUM_CLASSES):
        raise ValidationError(f"{name} contains a class outside 0..{NUM_CLASSES - 1}")
    return arr


def confusion(predictions, labels) -> np.ndarray:
    """``counts[t, p]``: number of frames of true class ``t`` predicted as ``p``."""
    pred = _as_labels(predictions, "predictions")
    true = _as_labels(labels, "labels")
    if len(pred) != len(true):
        raise ValidationError(f"length mismatch: {len(pred)} predictions vs {len(true)} labels")
    flat = np.bincount(true * NUM_CLASSES + pred, minlength=NUM_CLASSES * NUM_CLASSES)
    return flat.reshape(NUM_CLASSES, NUM_CLASSES)


def _check_confusion(cm) -> np.ndarray:
    cm = np.asarray(cm)
    if cm.shape[-2:] != (NUM_CLASSES, NUM_CLASSES):
        raise ValidationError(f"confusion matrix must be {NUM_CLASSES}x{NUM_CLASSES}, got {cm.shape}")
    if np.any(cm < 0):
        raise ValidationError("confusion matrix has negative counts")
    return cm


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def precision_recall(cm) -> tuple[np.ndarray, np.ndarray]:
    cm = _check_confusion(cm)
    tp = np.diagonal(cm, axis1=-2, axis2=-1)
    return _safe_div(tp, cm.sum(axis=-2)), _safe_div(tp, cm.sum(axis=-1))


def f1_per_class(cm) -> np.ndarray:
    """Harmonic mean of precision and recall per class; 0 wherever it is undefined.

    Accepts a stack of matrices with shape ``(..., 8, 8)``.
    """
    precision, recall = precision_recall(cm)
    return _safe_div(2.0 * precision * recall, precision + recall)


def macro_f1(cm) -> float:
    """Mean per-class F1 over all eight classes, including classes absent from ``cm``."""
    return float(f1_per_class(_check_confusion(cm).reshape(NUM_CLASSES, NUM_CLASSES)).sum() / NUM_CLASSES)


@dataclass(frozen=True)
class EvalReport:
    per_class_f1: tuple[float, ...]
    per_class_precision: tuple[float, ...]
    per_class_recall: tuple[float, ...]
    support: tuple[int, ...]
    macro_f1: float
    n_frames: int

    @classmethod
    def from_confusion(cls, cm) -> "EvalReport":
        cm = _check_confusion(cm)
        precision, recall = precision_recall(cm)
        f1 = f1_per_class(cm)
        return cls(
            per_class_f1=tuple(float(x) for x in f1),
            per_class_precision=tuple(float(x) for x in precision),
            per_class_recall=tuple(float(x) for x in recall),
            support=tuple(int(x) for x in cm.sum(axis=1)),
            macro_f1=macro_f1(cm),
            n_frames=int(cm.sum()),
        )

    def rows(self) -> list[dict]:
        return [
            {
                "class": name,
                "precision": self.per_class_precision[i],
                "recall": self.per_class_recall[i],
                "f1": self.per_class_f1[i],
                "support": self.support[i],
            }
            for i, name in enumerate(CLASS_NAMES)
        ]


def evaluate(predictions, labels) -> EvalReport:
    return EvalReport.from_confusion(confusion(predictions, labels))
