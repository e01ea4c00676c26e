"""Weighted probability fusion within a fold and across folds, plus weight search."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np

from .core import NUM_CLASSES, PredictionMatrix, ValidationError, argmax_labels, as_dataset
from .metrics import EvalReport, confusion, f1_per_class

PRESET_SOURCES = ("inception_v1", "resnet50", "efficientnet_b0")


@dataclass(frozen=True)
class FusionWeights:
    w: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in np.asarray(self.w, dtype=np.float64).reshape(-1))
        if not w:
            raise ValidationError("fusion weights are empty")
        if not all(np.isfinite(x) and x >= 0 for x in w):
            raise ValidationError(f"fusion weights must be finite and >= 0, got {w}")
        if not any(x > 0 for x in w):
            raise ValidationError("fusion weights are all zero")
        object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return len(self.w)

    def __iter__(self):
        return iter(self.w)

    @classmethod
    def equal(cls, n: int) -> "FusionWeights":
        return cls((1.0,) * n)

    @classmethod
    def parse(cls, text: str) -> "FusionWeights":
        """Parse colon-separated ratios such as ``"0.5:1.1:0.5"``."""
        try:
            return cls(tuple(float(x) for x in text.strip().split(":")))
        except ValueError as exc:
            raise ValidationError(f"bad weight ratio {text!r}: {exc}") from None

    def ratio(self) -> str:
        return ":".join(f"{x:g}" for x in self.w)


@dataclass(frozen=True)
class FusionPreset:
    method: str
    fold: int
    weights: FusionWeights
    reported_f1: float

    @property
    def name(self) -> str:
        return f"{self.method} / Fold {self.fold}"


@lru_cache(maxsize=None)
def _load_presets() -> tuple[FusionPreset, ...]:
    text = resources.files("exprensemble.data").joinpath("fusion_presets.csv").read_text()
    rows = csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#"))
    return tuple(
        FusionPreset(
            r["method"],
            int(r["fold"]),
            FusionWeights(tuple(float(r[s]) for s in PRESET_SOURCES)),
            float(r["f1"]),
        )
        for r in rows
    )


def list_presets() -> list[FusionPreset]:
    return list(_load_presets())


def get_preset(name: str, fold: int | None = None) -> FusionPreset:
    """Look up ``"Fusion 2 / Fold 1"``, or ``("Fusion 2", fold=1)``."""
    if fold is None:
        method, sep, rest = name.partition("/")
        if not sep:
            raise ValidationError(f"preset name {name!r} needs a fold, e.g. 'Fusion 2 / Fold 1'")
        try:
            fold = int(rest.strip().removeprefix("Fold").strip())
        except ValueError:
            raise ValidationError(f"cannot parse fold from preset name {name!r}") from None
        name = method
    key = name.strip().lower()
    for p in _load_presets():
        if p.method.lower() == key and p.fold == fold:
            return p
    raise ValidationError(f"unknown preset {name!r} fold {fold}")


@lru_cache(maxsize=None)
def reported_single_model_f1() -> dict[str, tuple[float, ...]]:
    """Per-fold macro-F1 reported for each backbone, as shipped reference data."""
    text = resources.files("exprensemble.data").joinpath("single_model_f1.csv").read_text()
    rows = csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#"))
    return {r["model"]: tuple(float(r[f"fold{i}"]) for i in range(1, 6)) for r in rows}


@dataclass(frozen=True)
class WeightGrid:
    """Candidate weight values tried for every source."""

    values: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(21))
    exhaustive: bool = True

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValidationError("weight grid is empty")
        if any(not np.isfinite(v) or v < 0 for v in values):
            raise ValidationError(f"grid values must be finite and >= 0: {values}")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValidationError(f"grid values must be strictly increasing: {values}")
        if not any(v > 0 for v in values):
            raise ValidationError("grid has no positive value")
        object.__setattr__(self, "values", values)

    @classmethod
    def parse(cls, text: str, exhaustive: bool = True) -> "WeightGrid":
        """``"start:stop:step"`` (inclusive) or a comma list ``"0,0.5,1"``."""
        try:
            if "," in text or ":" not in text:
                values = [float(v) for v in text.split(",")]
            else:
                start, stop, step = (float(v) for v in text.split(":"))
                if step <= 0:
                    raise ValueError("step must be positive")
                n = int(round((stop - start) / step))
                values = [round(start + i * step, 10) for i in range(n + 1)]
        except ValueError as exc:
            raise ValidationError(f"bad grid {text!r}: {exc}") from None
        return cls(tuple(values), exhaustive)

    def equal_value(self) -> float:
        """Grid value used for the all-equal starting point: 1.0 if present, else the largest."""
        return 1.0 if 1.0 in self.values else self.values[-1]


def _check_aligned(sources: Sequence[PredictionMatrix]) -> None:
    if not sources:
        raise ValidationError("need at least one prediction source")
    ref = sources[0]
    ref_set = set(ref.frame_ids)
    for s in sources[1:]:
        if s.frame_ids == ref.frame_ids:
            continue
        other = set(s.frame_ids)
        diff = sorted(ref_set ^ other)
        if diff or len(other) != len(s.frame_ids):
            raise ValidationError(
                f"frame sets of {ref.source_id!r} and {s.source_id!r} differ "
                f"({len(diff)} ids), e.g. {diff[:10]}"
            )


def _aligned_stack(sources: Sequence[PredictionMatrix]) -> np.ndarray:
    _check_aligned(sources)
    order = sources[0].frame_ids
    return np.stack([s.probs if s.frame_ids == order else s.subset(order).probs for s in sources])


def _weighted_mean(stack: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``sum_m w_m * stack[m] / sum_m w_m``; ``w`` may carry leading batch axes.

    Accumulation runs source by source so a batched call yields exactly the
    same floats as a single-tuple call.
    """
    w = np.asarray(w, dtype=np.float64)
    lead = w.shape[:-1]
    wm = w.reshape(lead + (1, 1, w.shape[-1]))
    acc = wm[..., 0] * stack[0]
    total = w[..., 0].copy()
    for m in range(1, stack.shape[0]):
        acc = acc + wm[..., m] * stack[m]
        total = total + w[..., m]
    return acc / np.asarray(total).reshape(lead + (1, 1))


def _fuse(sources: Sequence[PredictionMatrix], weights, source_id: str) -> PredictionMatrix:
    sources = list(sources)
    if weights is None:
        weights = FusionWeights.equal(len(sources))
    elif not isinstance(weights, FusionWeights):
        weights = FusionWeights(weights)
    if len(weights) != len(sources):
        raise ValidationError(f"{len(weights)} weights for {len(sources)} sources")
    stack = _aligned_stack(sources)
    fused = _weighted_mean(stack, np.array(weights.w))
    ref = sources[0]
    return PredictionMatrix(source_id, ref.frame_ids, ref.video_ids, fused)


def fuse_within_fold(sources: Sequence[PredictionMatrix], weights, source_id: str = "fused") -> PredictionMatrix:
    """Weighted average of the models' class distributions, frame by frame.

    Frame order comes from the first source.
    """
    if weights is None:
        raise ValidationError("fuse_within_fold requires explicit weights")
    return _fuse(sources, weights, source_id)


def fuse_across_folds(fold_outputs: Sequence[PredictionMatrix], weights=None, source_id: str = "cross_fold") -> PredictionMatrix:
    """Combine the per-fold fused outputs; equal weights unless given."""
    return _fuse(fold_outputs, weights, source_id)


def _label_vector(sources: Sequence[PredictionMatrix], labels) -> np.ndarray:
    frame_ids = sources[0].frame_ids
    if isinstance(labels, dict):
        lookup = labels
    else:
        data = as_dataset(labels)
        lookup = dict(zip(data.frame_ids, data.labels.tolist()))
    missing = [f for f in frame_ids if f not in lookup]
    if missing:
        raise ValidationError(f"{len(missing)} predicted frames have no label, e.g. {missing[:10]}")
    if len(lookup) != len(frame_ids):
        extra = sorted(set(lookup) - set(frame_ids))
        raise ValidationError(f"{len(extra)} labeled frames have no prediction, e.g. {extra[:10]}")
    return np.array([int(lookup[f]) for f in frame_ids], dtype=np.int64)


def _score_batch(stack: np.ndarray, labels: np.ndarray, tuples: np.ndarray) -> np.ndarray:
    fused = _weighted_mean(stack, tuples)
    pred = np.argmax(fused, axis=-1)
    codes = labels * NUM_CLASSES + pred + (np.arange(len(tuples)) * NUM_CLASSES**2)[:, None]
    cms = np.bincount(codes.ravel(), minlength=len(tuples) * NUM_CLASSES**2)
    cms = cms.reshape(len(tuples), NUM_CLASSES, NUM_CLASSES)
    return f1_per_class(cms).sum(axis=-1) / NUM_CLASSES


def _best(tuples: np.ndarray, scores: np.ndarray) -> int:
    best = scores.max()
    cand = np.flatnonzero(scores == best)
    # lexicographically smallest tuple among the maxima
    return int(min(cand, key=lambda i: tuple(tuples[i])))


def _exhaustive(stack, labels, grid: WeightGrid, chunk: int = 256):
    n_src = stack.shape[0]
    all_tuples = np.array(list(itertools.product(grid.values, repeat=n_src)), dtype=np.float64)
    all_tuples = all_tuples[all_tuples.sum(axis=1) > 0]
    scores = np.empty(len(all_tuples))
    for start in range(0, len(all_tuples), chunk):
        batch = all_tuples[start : start + chunk]
        scores[start : start + chunk] = _score_batch(stack, labels, batch)
    i = _best(all_tuples, scores)
    return all_tuples[i]


def _coordinate_ascent(stack, labels, grid: WeightGrid):
    n_src = stack.shape[0]
    values = np.array(grid.values)
    current = np.full(n_src, grid.equal_value())
    score = _score_batch(stack, labels, current[None, :])[0]
    improved = True
    while improved:
        improved = False
        for m in range(n_src):
            cands = np.repeat(current[None, :], len(values), axis=0)
            cands[:, m] = values
            cands = cands[cands.sum(axis=1) > 0]
            s = _score_batch(stack, labels, cands)
            i = _best(cands, s)
            if s[i] > score:
                current, score = cands[i].copy(), s[i]
                improved = True
    return current


def search_weights(sources: Sequence[PredictionMatrix], labels, grid: WeightGrid | None = None):
    """Pick fusion weights maximizing macro-F1 of the fused argmax.

    ``labels`` is a dataset (or sample list) covering exactly the sources'
    frames, or a ``{frame_id: class}`` mapping. Exhaustive mode scores every
    non-zero tuple of the grid's Cartesian product; ties go to the
    lexicographically smallest tuple. Coordinate mode starts from equal
    weights and re-optimizes one source at a time until nothing improves.

    Returns ``(FusionWeights, EvalReport)``.
    """
    grid = grid or WeightGrid()
    sources = list(sources)
    stack = _aligned_stack(sources)
    y = _label_vector(sources, labels)
    if grid.exhaustive:
        best = _exhaustive(stack, y, grid)
    else:
        best = _coordinate_ascent(stack, y, grid)
    weights = FusionWeights(tuple(best))
    fused = fuse_within_fold(sources, weights)
    report = EvalReport.from_confusion(confusion(argmax_labels(fused.probs), y))
    return weights, report
