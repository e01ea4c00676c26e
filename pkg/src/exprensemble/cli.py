"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .core import InvariantError, ValidationError
from .focal import FocalLossParams
from .folds import fold_view, split_five_fold
from .fusion import FusionWeights, WeightGrid, fuse_across_folds, fuse_within_fold, get_preset, search_weights
from .metrics import evaluate
from .pipeline import PipelineError, RunConfig, run_pipeline
from .synthetic import SyntheticSpec, write_synthetic
from .trainer import TrainConfig, predict, train

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("exprensemble")


def _columns(text: str | None):
    """``"0:4"`` (half-open range) or ``"0,2,5"``."""
    if not text:
        return None
    try:
        if ":" in text:
            lo, hi = (int(x) for x in text.split(":"))
            return tuple(range(lo, hi))
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ValidationError(f"bad column selection {text!r}") from None


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        initial_lr=args.lr,
        min_lr=args.min_lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        loss=FocalLossParams(alpha=args.alpha, gamma=args.gamma),
        shuffle_seed=args.seed,
    )


def _weights(args, n_sources: int):
    if args.weights and args.preset:
        raise ValidationError("give either --weights or --preset, not both")
    if args.preset:
        return get_preset(args.preset).weights
    if args.weights:
        return FusionWeights.parse(args.weights)
    return FusionWeights.equal(n_sources)


def cmd_gen(args) -> None:
    spec = SyntheticSpec(videos=args.videos, eval_videos=args.eval_videos, seed=args.seed)
    for name, path in write_synthetic(spec, args.out).items():
        print(f"{name}: {path}")


def cmd_split(args) -> None:
    plan = split_five_fold(io.read_dataset(args.dataset), args.k, args.seed)
    io.write_fold_plan(plan, args.out)
    print(f"fold plan ({plan.k} folds, {len(plan.assignment)} videos): {args.out}")


def cmd_train(args) -> None:
    data = io.read_dataset(args.dataset)
    if args.plan is not None:
        if args.fold is None:
            raise ValidationError("--plan needs --fold (1-based test fold to hold out)")
        data, _ = fold_view(data, io.read_fold_plan(args.plan), args.fold - 1)
    model = train(data, _train_config(args), columns=_columns(args.columns))
    io.write_model(model, args.out)
    hist = model.loss_history
    if hist:
        print(f"loss: first epoch {hist[0]:.6f}, last epoch {hist[-1]:.6f}")
    print(f"model: {args.out}")


def cmd_predict(args) -> None:
    model = io.read_model(args.model)
    data = io.read_dataset(args.dataset)
    if args.plan is not None:
        if args.fold is None:
            raise ValidationError("--plan needs --fold")
        _, data = fold_view(data, io.read_fold_plan(args.plan), args.fold - 1)
    m = predict(model, data, source_id=args.source_id or Path(args.model).stem)
    io.write_predictions(m, args.out)
    print(f"predictions ({len(m)} frames): {args.out}")


def cmd_fuse(args) -> None:
    sources = [io.read_predictions(p) for p in args.inputs]
    if args.across:
        weights = FusionWeights.parse(args.weights) if args.weights else None
        fused = fuse_across_folds(sources, weights)
    else:
        fused = fuse_within_fold(sources, _weights(args, len(sources)))
    io.write_predictions(fused, args.out)
    if args.submission:
        io.write_submission(fused, args.submission)
    print(f"fused ({len(sources)} sources, {len(fused)} frames): {args.out}")


def cmd_search(args) -> None:
    sources = [io.read_predictions(p) for p in args.inputs]
    data = io.read_dataset(args.dataset)
    frames = set(sources[0].frame_ids)
    labels = {f: int(y) for f, y in zip(data.frame_ids, data.labels) if f in frames}
    grid = WeightGrid.parse(args.grid, exhaustive=args.mode == "exhaustive")
    weights, report = search_weights(sources, labels, grid)
    print(f"best weights {weights.ratio()}  macro_f1={report.macro_f1:.6f}")
    if args.out:
        io.write_weights_record(weights, [s.source_id for s in sources], args.out,
                                mode=args.mode, macro_f1=io.fmt(report.macro_f1))


def cmd_eval(args) -> None:
    m = io.read_predictions(args.predictions)
    data = io.read_dataset(args.dataset)
    lookup = dict(zip(data.frame_ids, data.labels.tolist()))
    missing = [f for f in m.frame_ids if f not in lookup]
    if missing:
        raise ValidationError(f"{len(missing)} predicted frames have no label, e.g. {missing[:10]}")
    report = evaluate(m.labels(), [lookup[f] for f in m.frame_ids])
    print(f"macro_f1={report.macro_f1:.6f} over {report.n_frames} frames")
    for row in report.rows():
        print(f"  {row['class']:<10} f1={row['f1']:.4f} support={row['support']}")
    if args.out:
        io.write_report(report, args.out)
    if args.submission:
        io.write_submission(m, args.submission)


def cmd_pipeline(args) -> None:
    if args.config:
        config = RunConfig.load(args.config)
        if args.out:
            config = RunConfig.from_dict({**config.to_dict(), "output_dir": args.out})
    else:
        if not args.out:
            raise ValidationError("pipeline needs --out or --config")
        d = {"output_dir": args.out, "seed": args.seed, "jobs": args.jobs,
             "synthetic": SyntheticSpec(seed=args.seed).to_dict()}
        if args.dataset:
            d["dataset"] = args.dataset
            d["eval_dataset"] = args.eval_dataset
        if args.predictions:
            d["predictions"] = args.predictions
        if args.preset:
            d["preset"] = args.preset
        if args.grid:
            d["grid"] = {"values": list(WeightGrid.parse(args.grid).values), "exhaustive": args.mode == "exhaustive"}
        config = RunConfig.from_dict(d)
    result = run_pipeline(config)
    for fr in result.folds:
        print(f"fold {fr.fold + 1}: weights {fr.weights.ratio():<14} held-out macro_f1={fr.report.macro_f1:.4f}")
    print(f"best single source macro_f1={result.best_single_source_f1():.4f}")
    print(f"cross-fold fused macro_f1={result.final_report.macro_f1:.4f}")
    print(f"submission: {result.artifacts['submission']}")


def _add_train_options(p) -> None:
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--min-lr", type=float, default=0.0)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--alpha", type=float, default=1.0, help="focal balance weight, shared by all classes")
    p.add_argument("--gamma", type=float, default=2.0, help="focal focusing parameter, shared by all classes")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exprensemble", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic dataset and simulated prediction files")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--videos", type=int, default=50)
    p.add_argument("--eval-videos", type=int, default=10)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("split", help="video-grouped stratified k-fold plan")
    p.add_argument("--dataset", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a linear-softmax model with focal loss")
    p.add_argument("--dataset", required=True)
    p.add_argument("--plan", help="fold plan; trains on all folds except --fold")
    p.add_argument("--fold", type=int, help="1-based held-out fold")
    p.add_argument("--columns", help="feature columns, e.g. 0:4 or 0,2,5")
    p.add_argument("--out", required=True)
    _add_train_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write a prediction file from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--plan", help="fold plan; predicts only the --fold frames")
    p.add_argument("--fold", type=int)
    p.add_argument("--source-id")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("fuse", help="weighted fusion of prediction files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--weights", help="colon ratios, e.g. 0.5:1.1:0.5")
    p.add_argument("--preset", help="e.g. 'Fusion 2 / Fold 1'")
    p.add_argument("--across", action="store_true", help="fuse fold outputs (equal weights by default)")
    p.add_argument("--out", required=True)
    p.add_argument("--submission", help="also write the label sequence here")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("search", help="search fusion weights maximizing macro-F1")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--dataset", required=True, help="labels for the predicted frames")
    p.add_argument("--grid", default="0:2:0.1", help="start:stop:step or comma list")
    p.add_argument("--mode", choices=("exhaustive", "coordinate"), default="exhaustive")
    p.add_argument("--out", help="weight record file")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="macro-F1 report for a prediction file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", help="report file")
    p.add_argument("--submission", help="also write the label sequence here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="split, train, fuse within and across folds, evaluate")
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--dataset")
    p.add_argument("--eval-dataset")
    p.add_argument("--predictions", nargs="+", help="prediction files used as sources ({fold} = 1-based fold)")
    p.add_argument("--preset", help="fusion method name, e.g. 'Fusion 2'")
    p.add_argument("--grid")
    p.add_argument("--mode", choices=("exhaustive", "coordinate"), default="exhaustive")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_pipeline)
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, PipelineError):
        return _exit_code(exc.cause)
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_INTERNAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ValidationError, OSError, InvariantError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except json.JSONDecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
