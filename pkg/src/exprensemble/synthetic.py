"""Seeded synthetic stand-in for a video expression dataset.

Each video has one dominant class; its frames take that class with
probability ``dominant_fraction`` and otherwise draw from the class priors,
so the frame-level marginal equals the priors. Features are laid out in one
block per simulated source. Block ``m`` carries the class signal with
per-class noise ``noise[m, c]``, so every source is reliable for some
classes and weak for others and fusing them pays off.

Alongside the features, each source also gets a ready-made prediction
matrix: logits ``sharpness * onehot(label) + 1.5 * noise[m, c] * N(0, 1)``
pushed through softmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import NUM_CLASSES, Dataset, PredictionMatrix, ValidationError
from .focal import softmax

# Imbalanced toward neutral and happiness.
DEFAULT_PRIORS = (0.06, 0.03, 0.03, 0.20, 0.10, 0.08, 0.35, 0.15)


def _default_noise() -> tuple[tuple[float, ...], ...]:
    # Source m is sharp on classes c with c % 3 == m and blurry elsewhere.
    return tuple(
        tuple(0.6 if c % 3 == m else 1.6 for c in range(NUM_CLASSES)) for m in range(3)
    )


@dataclass(frozen=True)
class SyntheticSpec:
    videos: int = 50
    eval_videos: int = 10
    frames_per_video: tuple[int, int] = (60, 140)
    class_priors: tuple[float, ...] = DEFAULT_PRIORS
    dominant_fraction: float = 0.6
    features_per_source: int = 4
    class_separation: float = 2.0
    source_noise: tuple[tuple[float, ...], ...] = field(default_factory=_default_noise)
    prediction_sharpness: float = 2.0
    seed: int = 42

    def __post_init__(self):
        priors = np.asarray(self.class_priors, dtype=np.float64)
        if priors.shape != (NUM_CLASSES,) or np.any(priors < 0) or not np.all(np.isfinite(priors)):
            raise ValidationError(f"class_priors must be {NUM_CLASSES} non-negative values")
        if abs(priors.sum() - 1.0) > 1e-9:
            raise ValidationError(f"class_priors sum to {priors.sum()!r}, not 1")
        noise = np.asarray(self.source_noise, dtype=np.float64)
        if noise.ndim != 2 or noise.shape[1] != NUM_CLASSES or len(noise) < 1:
            raise ValidationError(f"source_noise must be (sources, {NUM_CLASSES})")
        if np.any(noise < 0) or not np.all(np.isfinite(noise)):
            raise ValidationError("noise levels must be finite and >= 0")
        lo, hi = self.frames_per_video
        if not 1 <= lo <= hi:
            raise ValidationError(f"bad frames_per_video range {self.frames_per_video}")
        if self.videos < 1 or self.eval_videos < 0:
            raise ValidationError("need videos >= 1 and eval_videos >= 0")
        if not 0 <= self.dominant_fraction <= 1:
            raise ValidationError("dominant_fraction must lie in [0, 1]")
        if self.features_per_source < 1:
            raise ValidationError("features_per_source must be >= 1")
        object.__setattr__(self, "class_priors", tuple(float(p) for p in priors))
        object.__setattr__(self, "source_noise", tuple(tuple(float(x) for x in row) for row in noise))
        object.__setattr__(self, "frames_per_video", (int(lo), int(hi)))

    @property
    def n_sources(self) -> int:
        return len(self.source_noise)

    @property
    def feature_dim(self) -> int:
        return self.n_sources * self.features_per_source

    def source_columns(self, m: int) -> tuple[int, ...]:
        d = self.features_per_source
        return tuple(range(m * d, (m + 1) * d))

    def to_dict(self) -> dict:
        return {
            "videos": self.videos,
            "eval_videos": self.eval_videos,
            "frames_per_video": list(self.frames_per_video),
            "class_priors": list(self.class_priors),
            "dominant_fraction": self.dominant_fraction,
            "features_per_source": self.features_per_source,
            "class_separation": self.class_separation,
            "source_noise": [list(r) for r in self.source_noise],
            "prediction_sharpness": self.prediction_sharpness,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown synthetic spec keys {sorted(unknown)}")
        if "frames_per_video" in d:
            d["frames_per_video"] = tuple(d["frames_per_video"])
        return cls(**d)


@dataclass(frozen=True)
class SyntheticData:
    pool: Dataset
    evaluation: Dataset
    sources: tuple[PredictionMatrix, ...]

    def source_ids(self) -> list[str]:
        return [s.source_id for s in self.sources]


def generate_synthetic(spec: SyntheticSpec | None = None) -> SyntheticData:
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(spec.seed)
    priors = np.array(spec.class_priors)
    noise = np.array(spec.source_noise)
    d = spec.features_per_source

    # Class centers per source block, scaled to the separation radius.
    centers = rng.normal(size=(spec.n_sources, NUM_CLASSES, d))
    centers *= spec.class_separation / np.linalg.norm(centers, axis=2, keepdims=True)

    def make_videos(prefix: str, count: int) -> Dataset:
        frames, videos, labels = [], [], []
        lo, hi = spec.frames_per_video
        for v in range(count):
            vid = f"{prefix}{v:03d}"
            n = int(rng.integers(lo, hi + 1))
            dominant = rng.choice(NUM_CLASSES, p=priors)
            keep = rng.random(n) < spec.dominant_fraction
            y = np.where(keep, dominant, rng.choice(NUM_CLASSES, size=n, p=priors))
            frames += [f"{vid}_{i:05d}" for i in range(n)]
            videos += [vid] * n
            labels.append(y)
        y = np.concatenate(labels) if labels else np.zeros(0, dtype=np.int64)
        blocks = [
            centers[m, y] + noise[m, y][:, None] * rng.normal(size=(len(y), d))
            for m in range(spec.n_sources)
        ]
        x = np.hstack(blocks) if len(y) else np.zeros((0, spec.feature_dim))
        return Dataset(frames, videos, x, y)

    pool = make_videos("v", spec.videos)
    evaluation = make_videos("t", spec.eval_videos)

    frame_ids = pool.frame_ids + evaluation.frame_ids
    video_ids = pool.video_ids + evaluation.video_ids
    y = np.concatenate([pool.labels, evaluation.labels])
    onehot = np.eye(NUM_CLASSES)[y]
    sources = []
    for m in range(spec.n_sources):
        z = spec.prediction_sharpness * onehot + 1.5 * noise[m, y][:, None] * rng.normal(size=onehot.shape)
        sources.append(PredictionMatrix(f"source{m}", frame_ids, video_ids, softmax(z)))
    return SyntheticData(pool, evaluation, tuple(sources))


def write_synthetic(spec: SyntheticSpec, out_dir) -> dict[str, Path]:
    """Write ``dataset.csv``, ``eval.csv`` and ``source<m>.csv`` under ``out_dir``."""
    from .io import write_dataset, write_predictions

    out_dir = Path(out_dir)
    data = generate_synthetic(spec)
    paths = {
        "dataset": write_dataset(data.pool, out_dir / "dataset.csv"),
        "eval": write_dataset(data.evaluation, out_dir / "eval.csv"),
    }
    for s in data.sources:
        paths[s.source_id] = write_predictions(s, out_dir / f"{s.source_id}.csv")
    return paths
