"""Linear-softmax classifier trained with focal loss, Adam and a cosine schedule.

This is the desk-scale stand-in for a CNN backbone: anything that turns
frames into per-class probabilities can feed the fusion blocks, and this is
the smallest model that exercises the full loss/optimizer/schedule path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import NUM_CLASSES, PredictionMatrix, ValidationError, as_dataset
from .focal import FocalLossParams, focal_loss_from_logits, focal_loss_grad_batch, softmax


@dataclass(frozen=True)
class TrainConfig:
    initial_lr: float = 0.001
    min_lr: float = 0.0
    epochs: int = 30
    batch_size: int = 256
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    loss: FocalLossParams = field(default_factory=FocalLossParams)
    shuffle_seed: int = 0

    def __post_init__(self):
        if not self.initial_lr > 0:
            raise ValidationError(f"initial_lr must be > 0, got {self.initial_lr}")
        if not 0 <= self.min_lr <= self.initial_lr:
            raise ValidationError(f"min_lr must lie in [0, initial_lr], got {self.min_lr}")
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ValidationError(f"{name} must lie in [0, 1)")
        if not self.adam_eps > 0:
            raise ValidationError("adam_eps must be > 0")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "loss"}
        d["loss"] = self.loss.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        loss = FocalLossParams.from_dict(d.pop("loss", {}))
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown train config keys {sorted(unknown)}")
        return cls(loss=loss, **d)


def cosine_lr(t: int, T: int, eta_max: float, eta_min: float = 0.0) -> float:
    """Single-cycle cosine annealing from ``eta_max`` at ``t=0`` to ``eta_min`` at ``t=T``."""
    if T < 1:
        raise ValidationError(f"T must be >= 1, got {T}")
    if not 0 <= t <= T:
        raise ValidationError(f"epoch {t} outside [0, {T}]")
    if not eta_max >= eta_min >= 0:
        raise ValidationError(f"need eta_max >= eta_min >= 0, got {eta_max}, {eta_min}")
    if t == 0:
        return float(eta_max)
    if t == T:
        return float(eta_min)
    return eta_min + 0.5 * (eta_max - eta_min) * (1.0 + math.cos(math.pi * t / T))


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros_like(cls, params: np.ndarray) -> "AdamState":
        shape = np.shape(params)
        return cls(np.zeros(shape), np.zeros(shape), 0)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray, lr: float, config: TrainConfig | None = None):
    """One bias-corrected Adam update. Returns ``(new_state, new_params)``; inputs are not modified."""
    config = config or TrainConfig()
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or state.first_moment.shape != params.shape:
        raise ValidationError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, state {state.first_moment.shape}"
        )
    if not np.all(np.isfinite(grads)):
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(grads))[0])
        raise ValidationError(f"non-finite gradient at index {idx}")

    b1, b2 = config.adam_beta1, config.adam_beta2
    t = state.step_count + 1
    m = b1 * state.first_moment + (1.0 - b1) * grads
    v = b2 * state.second_moment + (1.0 - b2) * grads * grads
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return AdamState(m, v, t), new_params


@dataclass(frozen=True, eq=False)
class LinearSoftmaxModel:
    """``softmax(x[columns] @ weights + bias)``.

    ``columns`` selects the feature columns the model reads (``None`` = all),
    which is how several models are trained on different views of one
    dataset. ``loss_history`` holds the mean training loss of each epoch.
    """

    weights: np.ndarray
    bias: np.ndarray
    columns: tuple[int, ...] | None = None
    loss_history: tuple[float, ...] = ()

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64).reshape(-1)
        if w.ndim != 2 or w.shape[1] != NUM_CLASSES or w.shape[0] < 1:
            raise ValidationError(f"weights must have shape (D, {NUM_CLASSES}), got {w.shape}")
        if b.shape != (NUM_CLASSES,):
            raise ValidationError(f"bias must have {NUM_CLASSES} entries, got {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValidationError("model parameters must be finite")
        if self.columns is not None:
            cols = tuple(int(c) for c in self.columns)
            if len(cols) != w.shape[0]:
                raise ValidationError(f"{len(cols)} columns for a {w.shape[0]}-dim model")
            object.__setattr__(self, "columns", cols)
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "loss_history", tuple(float(x) for x in self.loss_history))

    @classmethod
    def zeros(cls, dim: int, columns=None) -> "LinearSoftmaxModel":
        return cls(np.zeros((dim, NUM_CLASSES)), np.zeros(NUM_CLASSES), columns)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinearSoftmaxModel):
            return NotImplemented
        return (
            self.columns == other.columns
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.bias, other.bias)
        )

    __hash__ = None

    def select(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if self.columns is not None:
            if x.shape[1] <= max(self.columns):
                raise ValidationError(
                    f"model reads column {max(self.columns)} but data has {x.shape[1]} features"
                )
            x = x[:, self.columns]
        if x.shape[1] != self.dim:
            raise ValidationError(f"feature dimension {x.shape[1]} does not match model dimension {self.dim}")
        return x

    def logits(self, features: np.ndarray) -> np.ndarray:
        return self.select(features) @ self.weights + self.bias


def train(samples, config: TrainConfig | None = None, columns=None) -> LinearSoftmaxModel:
    """Mini-batch focal-loss training from a zero initialization.

    Each epoch shuffles with a generator seeded from ``config.shuffle_seed``,
    keeps the final partial batch, and uses the cosine learning rate for that
    epoch. Deterministic for fixed inputs.
    """
    config = config or TrainConfig()
    data = as_dataset(samples)
    if len(data) == 0:
        raise ValidationError("cannot train on an empty dataset")
    model = LinearSoftmaxModel.zeros(len(columns) if columns is not None else data.dim, columns)
    x = model.select(data.features)
    y = data.labels
    n, d = x.shape

    # Weights and bias share one parameter array: rows 0..d-1 weights, row d bias.
    params = np.vstack([model.weights, model.bias[None, :]])
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(config.shuffle_seed)
    history = []
    for epoch in range(config.epochs):
        lr = cosine_lr(epoch, config.epochs, config.initial_lr, config.min_lr)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x[idx], y[idx]
            z = xb @ params[:d] + params[d]
            total += float(focal_loss_from_logits(z, yb, config.loss).sum())
            g = focal_loss_grad_batch(z, yb, config.loss) / len(idx)
            grads = np.vstack([xb.T @ g, g.sum(axis=0)[None, :]])
            state, params = adam_step(state, params, grads, lr, config)
        history.append(total / n)
    return LinearSoftmaxModel(params[:d], params[d], model.columns, tuple(history))


def predict(model: LinearSoftmaxModel, samples, source_id: str = "linear_softmax") -> PredictionMatrix:
    """Per-frame class distributions in input order."""
    data = as_dataset(samples)
    if len(data) == 0:
        return PredictionMatrix(source_id, (), (), np.zeros((0, NUM_CLASSES)))
    probs = softmax(model.logits(data.features))
    return PredictionMatrix(source_id, data.frame_ids, data.video_ids, probs)
