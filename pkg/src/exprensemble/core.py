"""Shared domain types: the 8-class taxonomy, probability rows, prediction
matrices and labeled datasets."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

NUM_CLASSES = 8

# Frozen index order. Every file format and preset depends on it.
CLASS_NAMES = (
    "anger",
    "disgust",
    "fear",
    "happiness",
    "sadness",
    "surprise",
    "neutral",
    "other",
)

ROW_SUM_ATOL = 1e-6
ROW_SUM_RENORM_ATOL = 1e-3


class ExpressionClass(enum.IntEnum):
    ANGER = 0
    DISGUST = 1
    FEAR = 2
    HAPPINESS = 3
    SADNESS = 4
    SURPRISE = 5
    NEUTRAL = 6
    OTHER = 7

    @property
    def label(self) -> str:
        return CLASS_NAMES[self.value]


class ValidationError(ValueError):
    """Input violates a documented invariant (CLI exit code 1)."""


class InvariantError(RuntimeError):
    """An internal consistency check failed (CLI exit code 3)."""


def check_probability_vector(p, name: str = "p") -> np.ndarray:
    """Return ``p`` as a float array after checking it is a valid 8-class distribution."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape != (NUM_CLASSES,):
        raise ValidationError(f"{name}: expected {NUM_CLASSES} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: non-finite entry in {arr.tolist()}")
    if np.any(arr < 0):
        raise ValidationError(f"{name}: negative entry {float(arr.min())!r}")
    if np.any(arr > 1):
        raise ValidationError(f"{name}: entry above 1: {float(arr.max())!r}")
    total = float(arr.sum())
    if abs(total - 1.0) > ROW_SUM_ATOL:
        raise ValidationError(f"{name}: entries sum to {total!r}, not 1")
    return arr


def _first_argmax(scores: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximal index, which is the tie rule we want.
    return np.argmax(scores, axis=-1)


def argmax_label(p, *, validate: bool = True) -> ExpressionClass:
    """Class with the largest probability; ties go to the lowest index.

    With ``validate=False`` any finite score vector is accepted, which is
    how the scale-invariance property is exercised on raw scores.
    """
    if validate:
        arr = check_probability_vector(p)
    else:
        arr = np.asarray(p, dtype=np.float64)
        if arr.shape != (NUM_CLASSES,) or not np.all(np.isfinite(arr)):
            raise ValidationError(f"scores must be {NUM_CLASSES} finite values")
    return ExpressionClass(int(_first_argmax(arr)))


def argmax_labels(probs: np.ndarray) -> np.ndarray:
    """Row-wise :func:`argmax_label` over an ``(n, 8)`` array, without validation."""
    probs = np.asarray(probs)
    if probs.ndim != 2 or probs.shape[1] != NUM_CLASSES:
        raise ValidationError(f"expected an (n, {NUM_CLASSES}) array, got {probs.shape}")
    return _first_argmax(probs).astype(np.int64)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    """Per-frame class distributions from a single prediction source.

    Rows of ``probs`` follow ``frame_ids`` order; that order is kept by
    every transform in the package.
    """

    source_id: str
    frame_ids: tuple[str, ...]
    video_ids: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "frame_ids", tuple(str(f) for f in self.frame_ids))
        object.__setattr__(self, "video_ids", tuple(str(v) for v in self.video_ids))
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.size == 0:
            probs = probs.reshape(0, NUM_CLASSES)
        if probs.ndim != 2 or probs.shape[1] != NUM_CLASSES:
            raise ValidationError(f"probs must have shape (n, {NUM_CLASSES}), got {probs.shape}")
        n = probs.shape[0]
        if len(self.frame_ids) != n or len(self.video_ids) != n:
            raise ValidationError(
                f"length mismatch: {len(self.frame_ids)} frame ids, "
                f"{len(self.video_ids)} video ids, {n} rows"
            )
        object.__setattr__(self, "probs", _frozen(probs))

    def __len__(self) -> int:
        return len(self.frame_ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PredictionMatrix):
            return NotImplemented
        return (
            self.source_id == other.source_id
            and self.frame_ids == other.frame_ids
            and self.video_ids == other.video_ids
            and np.array_equal(self.probs, other.probs)
        )

    __hash__ = None

    def row(self, frame_id: str) -> np.ndarray:
        return self.probs[self.frame_ids.index(frame_id)]

    def labels(self) -> np.ndarray:
        """Argmax class index per frame."""
        return argmax_labels(self.probs)

    def subset(self, frame_ids: Iterable[str]) -> "PredictionMatrix":
        """Rows for ``frame_ids``, in the order given."""
        index = {f: i for i, f in enumerate(self.frame_ids)}
        wanted = list(frame_ids)
        missing = [f for f in wanted if f not in index]
        if missing:
            raise ValidationError(
                f"{self.source_id}: {len(missing)} frame ids not present, e.g. {missing[:10]}"
            )
        rows = [index[f] for f in wanted]
        return PredictionMatrix(
            self.source_id,
            tuple(wanted),
            tuple(self.video_ids[i] for i in rows),
            self.probs[rows],
        )

    def renamed(self, source_id: str) -> "PredictionMatrix":
        return PredictionMatrix(source_id, self.frame_ids, self.video_ids, self.probs)


def validate_prediction_matrix(m: PredictionMatrix) -> PredictionMatrix:
    """Check every row and return a validated matrix.

    Rows already summing to 1 within 1e-6 are kept bit-for-bit. Rows whose sum
    is off by at most 1e-3 (serialization rounding) are rescaled to sum to 1;
    anything further off is rejected, as are negative entries and duplicate
    frame ids.
    """
    seen: set[str] = set()
    for f in m.frame_ids:
        if f in seen:
            raise ValidationError(f"{m.source_id}: duplicate frame_id {f!r}")
        seen.add(f)

    probs = np.array(m.probs, dtype=np.float64)
    if len(probs) == 0:
        return m
    bad = ~np.isfinite(probs)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValidationError(
            f"{m.source_id}: frame {m.frame_ids[i]!r} has non-finite {CLASS_NAMES[j]} value {float(probs[i, j])!r}"
        )
    if (probs < 0).any():
        i, j = np.argwhere(probs < 0)[0]
        raise ValidationError(
            f"{m.source_id}: frame {m.frame_ids[i]!r} has negative {CLASS_NAMES[j]} value {float(probs[i, j])!r}"
        )
    sums = probs.sum(axis=1)
    off = np.abs(sums - 1.0)
    too_far = off > ROW_SUM_RENORM_ATOL
    if too_far.any():
        i = int(np.argmax(too_far))
        raise ValidationError(
            f"{m.source_id}: frame {m.frame_ids[i]!r} row sums to {float(sums[i])!r}"
        )
    fix = off > ROW_SUM_ATOL
    if not fix.any():
        return m
    probs[fix] /= sums[fix, None]
    return PredictionMatrix(m.source_id, m.frame_ids, m.video_ids, probs)


class LabeledSample(NamedTuple):
    frame_id: str
    video_id: str
    features: np.ndarray
    label: ExpressionClass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented collection of labeled frames.

    Functions that take "a list of samples" accept either a ``Dataset`` or
    a sequence of :class:`LabeledSample`; see :func:`as_dataset`.
    """

    frame_ids: tuple[str, ...]
    video_ids: tuple[str, ...]
    features: np.ndarray
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "frame_ids", tuple(str(f) for f in self.frame_ids))
        object.__setattr__(self, "video_ids", tuple(str(v) for v in self.video_ids))
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValidationError(f"features must be 2-D, got shape {feats.shape}")
        n = feats.shape[0]
        if n and feats.shape[1] < 1:
            raise ValidationError("feature dimension must be at least 1")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(labels) != n or len(self.frame_ids) != n or len(self.video_ids) != n:
            raise ValidationError("frame ids, video ids, features and labels differ in length")
        if n and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
            raise ValidationError(f"labels must lie in 0..{NUM_CLASSES - 1}")
        if not np.all(np.isfinite(feats)):
            raise ValidationError("features contain non-finite values")
        if len(set(self.frame_ids)) != n:
            dup = next(f for i, f in enumerate(self.frame_ids) if f in self.frame_ids[:i])
            raise ValidationError(f"duplicate frame_id {dup!r}")
        object.__setattr__(self, "features", _frozen(feats))
        labels = labels.copy()
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample]) -> "Dataset":
        samples = list(samples)
        if not samples:
            return cls((), (), np.zeros((0, 1)), np.zeros(0, dtype=np.int64))
        dims = {np.asarray(s.features).reshape(-1).shape[0] for s in samples}
        if len(dims) != 1:
            raise ValidationError(f"inconsistent feature dimensions {sorted(dims)}")
        return cls(
            tuple(s.frame_id for s in samples),
            tuple(s.video_id for s in samples),
            np.stack([np.asarray(s.features, dtype=np.float64).reshape(-1) for s in samples]),
            np.array([int(s.label) for s in samples], dtype=np.int64),
        )

    def __len__(self) -> int:
        return len(self.frame_ids)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> LabeledSample:
        return LabeledSample(
            self.frame_ids[i], self.video_ids[i], self.features[i], ExpressionClass(int(self.labels[i]))
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.frame_ids == other.frame_ids
            and self.video_ids == other.video_ids
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def take(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(
            tuple(self.frame_ids[i] for i in index),
            tuple(self.video_ids[i] for i in index),
            self.features[index].reshape(len(index), self.dim),
            self.labels[index],
        )


def as_dataset(samples) -> Dataset:
    if isinstance(samples, Dataset):
        return samples
    return Dataset.from_samples(samples)
