"""End-to-end run: split, per-fold training, fusion within and across folds, evaluation."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Dataset, InvariantError, PredictionMatrix, ValidationError
from .folds import FoldPlan, fold_view, split_five_fold
from .fusion import FusionWeights, WeightGrid, fuse_across_folds, fuse_within_fold, get_preset, search_weights
from .metrics import EvalReport, evaluate
from .synthetic import SyntheticSpec, write_synthetic
from . import io
from .trainer import TrainConfig, predict, train

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs.

    Without ``dataset`` a synthetic dataset is generated from ``synthetic``
    into ``<output_dir>/data``. With ``predictions`` the listed files act as
    the prediction sources instead of trained models; a ``{fold}``
    placeholder (1-based) selects per-fold files. ``views`` lists the
    feature columns each trained source reads. ``preset`` names a fusion
    method (e.g. ``"Fusion 2"``) whose per-fold weights replace the search.
    """

    output_dir: str
    dataset: str | None = None
    eval_dataset: str | None = None
    predictions: tuple[str, ...] = ()
    fold_plan: str | None = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    k: int = 5
    seed: int = 42
    train: TrainConfig = field(default_factory=TrainConfig)
    grid: WeightGrid = field(default_factory=WeightGrid)
    preset: str | None = None
    views: tuple[tuple[int, ...], ...] | None = None
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "predictions", tuple(self.predictions))
        if self.views is not None:
            object.__setattr__(self, "views", tuple(tuple(int(c) for c in v) for v in self.views))
        paths = [p for p in (self.output_dir, self.dataset, self.eval_dataset, self.fold_plan) if p]
        paths += list(self.predictions)
        resolved = [str(Path(p).resolve()) for p in paths]
        if len(set(resolved)) != len(resolved):
            raise ValidationError(f"config paths must be distinct: {paths}")
        if self.k < 2:
            raise ValidationError(f"k must be >= 2, got {self.k}")
        if self.jobs < 1:
            raise ValidationError("jobs must be >= 1")

    def to_dict(self) -> dict:
        return {
            "output_dir": self.output_dir,
            "dataset": self.dataset,
            "eval_dataset": self.eval_dataset,
            "predictions": list(self.predictions),
            "fold_plan": self.fold_plan,
            "synthetic": self.synthetic.to_dict(),
            "k": self.k,
            "seed": self.seed,
            "train": self.train.to_dict(),
            "grid": {"values": list(self.grid.values), "exhaustive": self.grid.exhaustive},
            "preset": self.preset,
            "views": None if self.views is None else [list(v) for v in self.views],
            "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        if "synthetic" in d:
            d["synthetic"] = SyntheticSpec.from_dict(d["synthetic"])
        if "train" in d:
            d["train"] = TrainConfig.from_dict(d["train"])
        if "grid" in d:
            g = d["grid"]
            d["grid"] = WeightGrid(tuple(g.get("values", WeightGrid().values)), g.get("exhaustive", True))
        if d.get("views") is not None:
            d["views"] = tuple(tuple(v) for v in d["views"])
        return cls(**d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON: {exc}") from None


@dataclass
class FoldResult:
    fold: int
    weights: FusionWeights
    report: EvalReport
    fused_eval: PredictionMatrix
    source_eval: list[PredictionMatrix]
    source_heldout_f1: dict[str, float]
    source_eval_f1: dict[str, float]


@dataclass
class PipelineResult:
    final_report: EvalReport
    folds: list[FoldResult]
    source_ids: list[str]
    cross_fold_source_f1: dict[str, float]
    artifacts: dict[str, Path]

    def best_single_source_f1(self) -> float:
        """Best macro-F1 on the evaluation set by any single model or single source family."""
        per_fold = [f1 for fr in self.folds for f1 in fr.source_eval_f1.values()]
        return max(per_fold + list(self.cross_fold_source_f1.values()))


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(self.name, exc) from exc
        return False


def _labels_of(data: Dataset, frames: PredictionMatrix) -> np.ndarray:
    lookup = dict(zip(data.frame_ids, data.labels.tolist()))
    return np.array([lookup[f] for f in frames.frame_ids], dtype=np.int64)


def run_pipeline(config: RunConfig) -> PipelineResult:
    out = Path(config.output_dir)
    artifacts: dict[str, Path] = {}

    with _Stage("load"):
        out.mkdir(parents=True, exist_ok=True)
        artifacts["config"] = io.atomic_write_text(out / "config.json", config.dumps())
        views = config.views
        if config.dataset is None:
            paths = write_synthetic(config.synthetic, out / "data")
            pool, evaluation = io.read_dataset(paths["dataset"]), io.read_dataset(paths["eval"])
            if views is None and not config.predictions:
                views = tuple(config.synthetic.source_columns(m) for m in range(config.synthetic.n_sources))
        else:
            pool = io.read_dataset(config.dataset)
            evaluation = io.read_dataset(config.eval_dataset) if config.eval_dataset else pool
        if not config.predictions and views is None:
            views = tuple(tuple(int(c) for c in b) for b in np.array_split(np.arange(pool.dim), 3) if len(b))

    with _Stage("split"):
        if config.fold_plan:
            plan = io.read_fold_plan(config.fold_plan)
            if plan.k != config.k:
                raise ValidationError(f"fold plan has k={plan.k}, config asks for k={config.k}")
        else:
            plan = split_five_fold(pool, config.k, config.seed)
        artifacts["fold_plan"] = io.write_fold_plan(plan, out / "fold_plan.csv")

    if config.predictions:
        source_ids = [Path(p.replace("{fold}", "")).stem.rstrip("_-") or f"source{i}" for i, p in enumerate(config.predictions)]
    else:
        source_ids = [f"view{m}" for m in range(len(views))]
    if config.preset and len(source_ids) != 3:
        raise PipelineError("fuse-within", ValidationError("fusion presets need exactly 3 sources"))

    def run_fold(i: int) -> FoldResult:
        return _run_fold(i, config, plan, pool, evaluation, views, source_ids, out)

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as ex:
            folds = list(ex.map(run_fold, range(plan.k)))
    else:
        folds = [run_fold(i) for i in range(plan.k)]
    for fr in folds:
        n = fr.fold + 1
        artifacts[f"fold{n}_weights"] = out / f"fold{n}_weights.txt"
        artifacts[f"fold{n}_report"] = out / f"fold{n}_report.txt"

    with _Stage("fuse-across"):
        final = fuse_across_folds([fr.fused_eval for fr in folds])
        eval_labels = _labels_of(evaluation, final)
        cross_source = {}
        for m, sid in enumerate(source_ids):
            alone = fuse_across_folds([fr.source_eval[m] for fr in folds])
            cross_source[sid] = evaluate(alone.labels(), eval_labels).macro_f1
        artifacts["final_predictions"] = io.write_predictions(final, out / "final_predictions.csv")

    with _Stage("eval"):
        report = evaluate(final.labels(), eval_labels)
        artifacts["final_report"] = io.write_report(
            report, out / "final_report.txt", folds=plan.k, sources=":".join(source_ids)
        )
        rows = [
            (sid, fr.fold + 1, io.fmt(fr.source_heldout_f1[sid]), io.fmt(fr.source_eval_f1[sid]))
            for fr in folds
            for sid in source_ids
        ]
        rows += [(sid, "all", "", io.fmt(cross_source[sid])) for sid in source_ids]
        rows += [("fused", fr.fold + 1, io.fmt(fr.report.macro_f1), "") for fr in folds]
        rows.append(("fused", "all", "", io.fmt(report.macro_f1)))
        table = "source,fold,heldout_f1,eval_f1\n" + "".join(",".join(map(str, r)) + "\n" for r in rows)
        artifacts["sources_report"] = io.atomic_write_text(out / "sources_report.csv", table)

    with _Stage("submission"):
        path = io.write_submission(final, out / "submission.csv")
        if len(io.read_submission(path)) != len(evaluation):
            raise InvariantError("submission line count differs from evaluation frame count")
        artifacts["submission"] = path

    return PipelineResult(report, folds, source_ids, cross_source, artifacts)


def _run_fold(i, config: RunConfig, plan: FoldPlan, pool: Dataset, evaluation: Dataset, views, source_ids, out: Path) -> FoldResult:
    n = i + 1
    fold_dir = out / f"fold{n}"
    with _Stage(f"train (fold {n})"):
        train_set, test_set = fold_view(pool, plan, i)
        test_preds, eval_preds = [], []
        if config.predictions:
            for sid, pattern in zip(source_ids, config.predictions):
                m = io.read_predictions(pattern.replace("{fold}", str(n)), source_id=sid)
                test_preds.append(m.subset(test_set.frame_ids))
                eval_preds.append(m.subset(evaluation.frame_ids))
        else:
            for sid, cols in zip(source_ids, views):
                model = train(train_set, config.train, columns=cols)
                io.write_model(model, fold_dir / f"{sid}_model.txt")
                test_preds.append(predict(model, test_set, sid))
                eval_preds.append(predict(model, evaluation, sid))
        for t, e in zip(test_preds, eval_preds):
            io.write_predictions(t, fold_dir / f"{t.source_id}_heldout.csv")
            io.write_predictions(e, fold_dir / f"{e.source_id}_eval.csv")

    with _Stage(f"fuse-within (fold {n})"):
        if config.preset:
            weights = get_preset(config.preset, fold=n).weights
            mode = f"preset {config.preset}"
        else:
            weights, _ = search_weights(test_preds, test_set, config.grid)
            mode = "exhaustive" if config.grid.exhaustive else "coordinate"
        fused_test = fuse_within_fold(test_preds, weights, f"fold{n}")
        fused_eval = fuse_within_fold(eval_preds, weights, f"fold{n}")
        report = evaluate(fused_test.labels(), test_set.labels)
        io.write_weights_record(weights, source_ids, out / f"fold{n}_weights.txt", fold=n, mode=mode,
                                heldout_macro_f1=io.fmt(report.macro_f1))
        io.write_report(report, out / f"fold{n}_report.txt", fold=n, split="heldout")
        io.write_predictions(fused_eval, fold_dir / "fused_eval.csv")

    eval_y = evaluation.labels
    return FoldResult(
        fold=i,
        weights=weights,
        report=report,
        fused_eval=fused_eval,
        source_eval=eval_preds,
        source_heldout_f1={p.source_id: evaluate(p.labels(), test_set.labels).macro_f1 for p in test_preds},
        source_eval_f1={p.source_id: evaluate(p.labels(), eval_y).macro_f1 for p in eval_preds},
    )
