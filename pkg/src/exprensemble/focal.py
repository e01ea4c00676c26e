"""Multi-class focal loss with its analytic gradient through softmax.

For a frame of true class ``k`` with predicted probability ``p_k``::

    FL = alpha_k * (1 - p_k) ** gamma_k * (-log p_k)

The loss is kept non-negative (the minus sign sits on the log). ``gamma``
is stored per class; the default configuration shares one value across
all eight classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import NUM_CLASSES, ValidationError, check_probability_vector

LOG_CLAMP = 1e-12


def _class_vector(value, name: str) -> tuple[float, ...]:
    arr = np.broadcast_to(np.asarray(value, dtype=np.float64), (NUM_CLASSES,))
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValidationError(f"{name} entries must be finite and >= 0, got {arr.tolist()}")
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class FocalLossParams:
    """Per-class balance weights ``alpha`` and focusing exponents ``gamma``.

    Scalars are broadcast to all eight classes.
    """

    alpha: tuple[float, ...] = (1.0,) * NUM_CLASSES
    gamma: tuple[float, ...] = (2.0,) * NUM_CLASSES

    def __post_init__(self):
        object.__setattr__(self, "alpha", _class_vector(self.alpha, "alpha"))
        object.__setattr__(self, "gamma", _class_vector(self.gamma, "gamma"))

    @classmethod
    def cross_entropy(cls) -> "FocalLossParams":
        return cls(alpha=1.0, gamma=0.0)

    def to_dict(self) -> dict:
        return {"alpha": list(self.alpha), "gamma": list(self.gamma)}

    @classmethod
    def from_dict(cls, d: dict) -> "FocalLossParams":
        return cls(alpha=d.get("alpha", 1.0), gamma=d.get("gamma", 2.0))


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax; the max logit is subtracted first."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_label(label) -> int:
    k = int(label)
    if not 0 <= k < NUM_CLASSES:
        raise ValidationError(f"label {label!r} outside 0..{NUM_CLASSES - 1}")
    return k


def _focal_terms(p_true: np.ndarray, alpha: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    p = np.maximum(p_true, LOG_CLAMP)
    return alpha * (1.0 - p_true) ** gamma * -np.log(p)


def focal_loss(p, label, params: FocalLossParams | None = None) -> float:
    """Focal loss of one probability vector against its true class."""
    params = params or FocalLossParams()
    p = check_probability_vector(p)
    k = _check_label(label)
    return float(_focal_terms(p[k], params.alpha[k], params.gamma[k]))


def focal_loss_batch(samples: Sequence[tuple], params: FocalLossParams | None = None) -> float:
    """Mean focal loss over ``(probability_vector, label)`` pairs."""
    samples = list(samples)
    if not samples:
        raise ValidationError("focal_loss_batch needs at least one sample")
    params = params or FocalLossParams()
    return float(np.mean([focal_loss(p, y, params) for p, y in samples]))


def focal_loss_from_logits(z: np.ndarray, labels: np.ndarray, params: FocalLossParams | None = None) -> np.ndarray:
    """Per-row focal loss for an ``(n, 8)`` logit array; no validation beyond finiteness."""
    params = params or FocalLossParams()
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if not np.all(np.isfinite(z)):
        raise ValidationError("logits must be finite")
    rows = np.arange(len(z))
    p = softmax(z)
    p_true = p[rows, labels]
    alpha = np.asarray(params.alpha)[labels]
    gamma = np.asarray(params.gamma)[labels]
    # log p_k from the log-sum-exp form stays accurate when p_k underflows.
    shifted = z - z.max(axis=1, keepdims=True)
    log_p = shifted[rows, labels] - np.log(np.exp(shifted).sum(axis=1))
    log_p = np.maximum(log_p, np.log(LOG_CLAMP))
    return alpha * (1.0 - p_true) ** gamma * -log_p


def focal_loss_grad_batch(z: np.ndarray, labels: np.ndarray, params: FocalLossParams | None = None) -> np.ndarray:
    """Gradient of the per-row focal loss with respect to each row of logits.

    With ``p = softmax(z)``, ``q = 1 - p_k`` and ``r = log(p_k) / q`` the
    gradient is ``alpha_k * q**gamma_k * (1 - gamma_k * p_k * r) * (p - onehot_k)``.
    ``q`` is summed from the off-class probabilities so it keeps precision as
    ``p_k`` approaches 1, where ``r`` tends to -1.
    """
    params = params or FocalLossParams()
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if z.shape[-1] != NUM_CLASSES or len(labels) != len(z):
        raise ValidationError(f"logits shape {z.shape} does not match {len(labels)} labels")
    if not np.all(np.isfinite(z)):
        i, j = np.argwhere(~np.isfinite(z))[0]
        raise ValidationError(f"non-finite logit at row {i}, class {j}")

    rows = np.arange(len(z))
    p = softmax(z)
    p_true = p[rows, labels]
    off = p.copy()
    off[rows, labels] = 0.0
    q = off.sum(axis=1)
    alpha = np.asarray(params.alpha)[labels]
    gamma = np.asarray(params.gamma)[labels]

    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(q > 0, np.log1p(-q) / q, -1.0)
    coef = alpha * q**gamma * (1.0 - gamma * p_true * r)
    # Below the clamp the log term is constant; only (1 - p_k)**gamma still varies.
    clamped = p_true < LOG_CLAMP
    if clamped.any():
        c = -np.log(LOG_CLAMP)
        coef = np.where(clamped, alpha * gamma * q ** (gamma - 1.0) * c * p_true, coef)
    onehot = np.zeros_like(p)
    onehot[rows, labels] = 1.0
    return coef[:, None] * (p - onehot)


def focal_loss_grad(z, label, params: FocalLossParams | None = None) -> np.ndarray:
    """Gradient of ``focal_loss(softmax(z), label)`` with respect to the 8 logits."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (NUM_CLASSES,):
        raise ValidationError(f"expected {NUM_CLASSES} logits, got shape {z.shape}")
    k = _check_label(label)
    return focal_loss_grad_batch(z[None, :], np.array([k]), params)[0]
