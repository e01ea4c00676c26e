"""Video-grouped, class-stratified k-fold splitting."""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .core import NUM_CLASSES, Dataset, ValidationError, as_dataset

# Relative weight of the fold-size term against the class-proportion term.
SIZE_WEIGHT = 1.0


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: Mapping[str, int]
    seed: int

    def __post_init__(self):
        if self.k < 2:
            raise ValidationError(f"k must be >= 2, got {self.k}")
        bad = {v: f for v, f in self.assignment.items() if not 0 <= f < self.k}
        if bad:
            raise ValidationError(f"fold index out of range 0..{self.k - 1}: {bad}")
        object.__setattr__(self, "assignment", MappingProxyType(dict(self.assignment)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FoldPlan):
            return NotImplemented
        return (
            self.k == other.k
            and self.seed == other.seed
            and list(self.assignment.items()) == list(other.assignment.items())
        )

    def fold_of(self, video_id: str) -> int:
        try:
            return self.assignment[video_id]
        except KeyError:
            raise ValidationError(f"video {video_id!r} is not in the fold plan") from None

    def videos_in(self, fold: int) -> list[str]:
        return [v for v, f in self.assignment.items() if f == fold]


def _video_table(data: Dataset):
    videos: dict[str, int] = {}
    for v in data.video_ids:
        videos.setdefault(v, len(videos))
    counts = np.zeros((len(videos), NUM_CLASSES), dtype=np.int64)
    vidx = np.fromiter((videos[v] for v in data.video_ids), dtype=np.int64, count=len(data))
    np.add.at(counts, (vidx, data.labels), 1)
    return list(videos), counts


def split_five_fold(samples, k: int = 5, seed: int = 0) -> FoldPlan:
    """Assign whole videos to ``k`` folds of similar size and class mix.

    Videos are placed largest first (seeded shuffle among equal sizes). Each
    goes to the fold, among those still below the target size ``N / k``,
    that minimizes the squared distance of all folds' sizes and per-class
    counts from their targets. Placing only into under-target folds bounds
    every fold's excess by the largest video. A move/swap pass then lowers
    the worst per-fold class-proportion deviation while keeping each fold
    within one largest video of ``N / k``.
    """
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    data = as_dataset(samples)
    videos, counts = _video_table(data)
    if len(videos) < k:
        raise ValidationError(f"need at least k={k} distinct videos, got {len(videos)}")

    sizes = counts.sum(axis=1)
    rng = np.random.default_rng(seed)
    tiebreak = rng.permutation(len(videos))
    order = np.lexsort((tiebreak, -sizes))

    n = float(sizes.sum())
    target_size = n / k
    target_class = counts.sum(axis=0) / k
    fold_counts = np.zeros((k, NUM_CLASSES))
    fold_sizes = np.zeros(k)
    assignment = np.empty(len(videos), dtype=np.int64)

    for v in order:
        vc = counts[v]
        nv = float(sizes[v])
        # Increase of the squared-deviation objective if video v joins each fold.
        d_size = 2.0 * (fold_sizes - target_size) * nv + nv * nv
        d_class = (2.0 * (fold_counts - target_class) * vc + vc * vc).sum(axis=1)
        cost = (SIZE_WEIGHT * d_size + d_class) / target_size**2
        open_folds = fold_sizes < target_size
        if not open_folds.any():
            open_folds = fold_sizes == fold_sizes.min()
        cost = np.where(open_folds, cost, np.inf)
        f = int(np.argmin(cost))
        assignment[v] = f
        fold_counts[f] += vc
        fold_sizes[f] += nv

    assignment = _refine(assignment, counts, k, target_size, float(sizes.max()))
    return FoldPlan(k, {videos[i]: int(assignment[i]) for i in range(len(videos))}, seed)


def _objective(fold_counts, global_prop) -> tuple[float, float]:
    """(largest per-fold class-proportion deviation, squared proportion + relative size deviations)."""
    sizes = fold_counts.sum(axis=1, keepdims=True)
    dev = fold_counts / np.maximum(sizes, 1.0) - global_prop
    size_dev = sizes / sizes.mean() - 1.0
    return float(np.abs(dev).max()), float((dev**2).sum() + SIZE_WEIGHT * (size_dev**2).sum())


def _refine(assignment, counts, k, target_size, slack, max_passes: int = 50):
    """Improve the greedy plan by single-video moves and pairwise swaps.

    A change is kept only if it lowers the worst per-fold class-proportion
    deviation (squared proportion and size deviations break ties) and leaves every fold within
    ``slack`` (the largest video) of the target size. Candidates are
    scanned in a fixed order, so the result is deterministic.
    """
    assignment = assignment.copy()
    fold_counts = np.zeros((k, NUM_CLASSES))
    np.add.at(fold_counts, assignment, counts)
    global_prop = counts.sum(axis=0) / counts.sum()
    best = _objective(fold_counts, global_prop)
    n = len(assignment)

    def better(trial) -> tuple[bool, tuple[float, float]]:
        if not np.all(np.abs(trial.sum(axis=1) - target_size) <= slack):
            return False, best
        score = _objective(trial, global_prop)
        return (score[0] < best[0] - 1e-12 or (score[0] <= best[0] and score[1] < best[1] - 1e-12)), score

    for _ in range(max_passes):
        improved = False
        for a in range(n):
            fa = assignment[a]
            for g in range(k):
                if g == fa:
                    continue
                trial = fold_counts.copy()
                trial[fa] -= counts[a]
                trial[g] += counts[a]
                ok, score = better(trial)
                if ok:
                    assignment[a], fold_counts, best, fa = g, trial, score, g
                    improved = True
            for b in range(a + 1, n):
                fb = assignment[b]
                if fb == fa:
                    continue
                delta = counts[a] - counts[b]
                trial = fold_counts.copy()
                trial[fa] -= delta
                trial[fb] += delta
                ok, score = better(trial)
                if ok:
                    assignment[a], assignment[b] = fb, fa
                    fold_counts, best, fa = trial, score, fb
                    improved = True
        if not improved:
            break
    return assignment


def fold_view(samples, plan: FoldPlan, test_fold: int):
    """Split into ``(train, test)``; test holds the videos of ``test_fold``.

    Returns :class:`Dataset` objects when given one, else lists of samples.
    """
    if not 0 <= test_fold < plan.k:
        raise ValidationError(f"test_fold {test_fold} out of range 0..{plan.k - 1}")
    data = as_dataset(samples)
    in_test = np.array([plan.fold_of(v) == test_fold for v in data.video_ids], dtype=bool)
    train, test = data.take(np.flatnonzero(~in_test)), data.take(np.flatnonzero(in_test))
    if isinstance(samples, Dataset):
        return train, test
    return list(train), list(test)
