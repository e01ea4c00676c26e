"""Text file formats. Every writer is atomic and every reader inverts its writer exactly.

Formats (comma-separated, one header line):

* predictions: ``frame_id,video_id,anger,...,other``
* dataset: ``frame_id,video_id,label,f0,...,f{D-1}``
* fold plan: ``# k=<k> seed=<seed>`` then ``video_id,fold``
* submission: ``frame_id,label_index``
* model: versioned header, then ``D`` weight rows and one bias row
* report / weight record: ``key=value`` lines, then a CSV table
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import (
    CLASS_NAMES,
    NUM_CLASSES,
    Dataset,
    PredictionMatrix,
    ValidationError,
    argmax_labels,
    validate_prediction_matrix,
)
from .folds import FoldPlan
from .fusion import FusionWeights
from .metrics import EvalReport
from .trainer import LinearSoftmaxModel

PREDICTION_HEADER = ("frame_id", "video_id") + CLASS_NAMES
SUBMISSION_HEADER = ("frame_id", "label_index")
FOLD_HEADER = ("video_id", "fold")
MODEL_MAGIC = "# exprensemble linear-softmax model v1"


class FormatError(ValidationError):
    """A file does not follow its format; the message carries path and line."""


def fmt(x: float) -> str:
    # repr is the shortest string that parses back to the same double
    return repr(float(x))


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _lines(path) -> list[str]:
    with open(path, newline="") as fh:
        return fh.read().splitlines()


def _parse_float(path, lineno: int, name: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: field {name!r} is not a number: {text!r}") from None


def _parse_int(path, lineno: int, name: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: field {name!r} is not an integer: {text!r}") from None


def _check_header(path, got: list[str], want: tuple[str, ...], what: str) -> None:
    if tuple(got) == want:
        return
    if sorted(got) == sorted(want):
        raise FormatError(f"{path}:1: {what} columns are in the wrong order: {got}; expected {list(want)}")
    raise FormatError(f"{path}:1: bad {what} header {got}; expected {list(want)}")


def _data_rows(path, lines: list[str], start: int, ncols: int):
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != ncols:
            raise FormatError(f"{path}:{lineno}: expected {ncols} columns, got {len(fields)}")
        yield lineno, fields


# -- predictions ------------------------------------------------------------

def write_predictions(matrix: PredictionMatrix, path) -> Path:
    out = [",".join(PREDICTION_HEADER)]
    for f, v, row in zip(matrix.frame_ids, matrix.video_ids, matrix.probs):
        out.append(",".join([f, v] + [fmt(x) for x in row]))
    return atomic_write_text(path, "\n".join(out) + "\n")


def read_predictions(path, source_id: str | None = None) -> PredictionMatrix:
    lines = _lines(path)
    if not lines:
        raise FormatError(f"{path}: empty file")
    _check_header(path, lines[0].split(","), PREDICTION_HEADER, "prediction (class order)")
    frames, videos, rows = [], [], []
    for lineno, fields in _data_rows(path, lines, 1, len(PREDICTION_HEADER)):
        frames.append(fields[0])
        videos.append(fields[1])
        rows.append([_parse_float(path, lineno, CLASS_NAMES[j], x) for j, x in enumerate(fields[2:])])
    probs = np.array(rows, dtype=np.float64).reshape(len(rows), NUM_CLASSES)
    m = PredictionMatrix(source_id or Path(path).stem, frames, videos, probs)
    return validate_prediction_matrix(m)


# -- dataset ----------------------------------------------------------------

def write_dataset(data: Dataset, path) -> Path:
    header = ["frame_id", "video_id", "label"] + [f"f{j}" for j in range(data.dim)]
    out = [",".join(header)]
    for f, v, y, x in zip(data.frame_ids, data.video_ids, data.labels, data.features):
        out.append(",".join([f, v, str(int(y))] + [fmt(t) for t in x]))
    return atomic_write_text(path, "\n".join(out) + "\n")


def read_dataset(path) -> Dataset:
    lines = _lines(path)
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = lines[0].split(",")
    dim = len(header) - 3
    want = ("frame_id", "video_id", "label") + tuple(f"f{j}" for j in range(max(dim, 0)))
    if dim < 1 or tuple(header) != want:
        raise FormatError(f"{path}:1: bad dataset header {header}; expected frame_id,video_id,label,f0..")
    frames, videos, labels, feats = [], [], [], []
    for lineno, fields in _data_rows(path, lines, 1, len(header)):
        frames.append(fields[0])
        videos.append(fields[1])
        y = _parse_int(path, lineno, "label", fields[2])
        if not 0 <= y < NUM_CLASSES:
            raise FormatError(f"{path}:{lineno}: label {y} outside 0..{NUM_CLASSES - 1}")
        labels.append(y)
        feats.append([_parse_float(path, lineno, header[3 + j], x) for j, x in enumerate(fields[3:])])
    return Dataset(frames, videos, np.array(feats, dtype=np.float64).reshape(len(feats), dim), labels)


# -- fold plan --------------------------------------------------------------

def write_fold_plan(plan: FoldPlan, path) -> Path:
    out = [f"# k={plan.k} seed={plan.seed}", ",".join(FOLD_HEADER)]
    out += [f"{v},{f}" for v, f in plan.assignment.items()]
    return atomic_write_text(path, "\n".join(out) + "\n")


def read_fold_plan(path) -> FoldPlan:
    lines = _lines(path)
    if len(lines) < 2 or not lines[0].startswith("#"):
        raise FormatError(f"{path}:1: missing '# k=<k> seed=<seed>' header")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split() if "=" in tok)
    if "k" not in meta or "seed" not in meta:
        raise FormatError(f"{path}:1: header must define k and seed, got {lines[0]!r}")
    k = _parse_int(path, 1, "k", meta["k"])
    seed = _parse_int(path, 1, "seed", meta["seed"])
    _check_header(path, lines[1].split(","), FOLD_HEADER, "fold plan")
    assignment = {}
    for lineno, (video, fold) in _data_rows(path, lines, 2, 2):
        if video in assignment:
            raise FormatError(f"{path}:{lineno}: video {video!r} listed twice")
        assignment[video] = _parse_int(path, lineno, "fold", fold)
    return FoldPlan(k, assignment, seed)


# -- submission -------------------------------------------------------------

def write_submission(matrix: PredictionMatrix, path) -> Path:
    """One ``frame_id,label_index`` line per frame, in matrix order."""
    labels = argmax_labels(matrix.probs) if len(matrix) else []
    out = [",".join(SUBMISSION_HEADER)]
    out += [f"{f},{int(y)}" for f, y in zip(matrix.frame_ids, labels)]
    return atomic_write_text(path, "\n".join(out) + "\n")


def read_submission(path) -> list[tuple[str, int]]:
    lines = _lines(path)
    if not lines:
        raise FormatError(f"{path}: empty file")
    _check_header(path, lines[0].split(","), SUBMISSION_HEADER, "submission")
    rows = []
    for lineno, (frame, label) in _data_rows(path, lines, 1, 2):
        y = _parse_int(path, lineno, "label_index", label)
        if not 0 <= y < NUM_CLASSES:
            raise FormatError(f"{path}:{lineno}: label {y} outside 0..{NUM_CLASSES - 1}")
        rows.append((frame, y))
    return rows


# -- model ------------------------------------------------------------------

def write_model(model: LinearSoftmaxModel, path) -> Path:
    cols = "all" if model.columns is None else " ".join(str(c) for c in model.columns)
    out = [
        MODEL_MAGIC,
        f"dim={model.dim}",
        "classes=" + ",".join(CLASS_NAMES),
        f"columns={cols}",
    ]
    out += [",".join(fmt(x) for x in row) for row in model.weights]
    out.append(",".join(fmt(x) for x in model.bias))
    return atomic_write_text(path, "\n".join(out) + "\n")


def read_model(path) -> LinearSoftmaxModel:
    lines = _lines(path)
    if not lines or lines[0] != MODEL_MAGIC:
        raise FormatError(f"{path}:1: not a model file (expected {MODEL_MAGIC!r})")
    meta = {}
    for lineno in (2, 3, 4):
        key, sep, value = lines[lineno - 1].partition("=") if len(lines) >= lineno else ("", "", "")
        if not sep:
            raise FormatError(f"{path}:{lineno}: expected key=value")
        meta[key] = value
    if meta.get("classes") != ",".join(CLASS_NAMES):
        raise FormatError(f"{path}:3: class order {meta.get('classes')!r} does not match {','.join(CLASS_NAMES)!r}")
    dim = _parse_int(path, 2, "dim", meta.get("dim", ""))
    columns = None if meta.get("columns") == "all" else tuple(
        _parse_int(path, 4, "columns", c) for c in meta.get("columns", "").split()
    )
    rows = list(_data_rows(path, lines, 4, NUM_CLASSES))
    if len(rows) != dim + 1:
        raise FormatError(f"{path}: expected {dim} weight rows and 1 bias row, got {len(rows)} rows")
    values = [[_parse_float(path, ln, CLASS_NAMES[j], x) for j, x in enumerate(fields)] for ln, fields in rows]
    return LinearSoftmaxModel(np.array(values[:dim]), np.array(values[dim]), columns)


# -- key=value + table documents -------------------------------------------

def _kv_table(meta: dict, header: Iterable[str], rows: Iterable[Iterable]) -> str:
    out = [f"{k}={v}" for k, v in meta.items()]
    out.append(",".join(header))
    out += [",".join(str(x) for x in r) for r in rows]
    return "\n".join(out) + "\n"


def _read_kv_table(path, first_column: str):
    lines = _lines(path)
    meta, i = {}, 0
    while i < len(lines) and not lines[i].startswith(first_column + ","):
        if lines[i].strip():
            key, sep, value = lines[i].partition("=")
            if not sep:
                raise FormatError(f"{path}:{i + 1}: expected key=value, got {lines[i]!r}")
            meta[key] = value
        i += 1
    if i == len(lines):
        raise FormatError(f"{path}: missing table header starting with {first_column!r}")
    header = lines[i].split(",")
    rows = [dict(zip(header, fields)) for _, fields in _data_rows(path, lines, i + 1, len(header))]
    return meta, header, rows


REPORT_COLUMNS = ("class", "precision", "recall", "f1", "support")


def write_report(report: EvalReport, path, **extra) -> Path:
    meta = {"macro_f1": fmt(report.macro_f1), "n_frames": report.n_frames}
    meta.update(extra)
    rows = [
        (r["class"], fmt(r["precision"]), fmt(r["recall"]), fmt(r["f1"]), r["support"])
        for r in report.rows()
    ]
    return atomic_write_text(path, _kv_table(meta, REPORT_COLUMNS, rows))


def read_report(path) -> tuple[EvalReport, dict]:
    """Returns the report and any extra ``key=value`` entries."""
    meta, header, rows = _read_kv_table(path, "class")
    if tuple(header) != REPORT_COLUMNS or [r["class"] for r in rows] != list(CLASS_NAMES):
        raise FormatError(f"{path}: report table must list {list(CLASS_NAMES)} with columns {REPORT_COLUMNS}")
    try:
        report = EvalReport(
            per_class_f1=tuple(float(r["f1"]) for r in rows),
            per_class_precision=tuple(float(r["precision"]) for r in rows),
            per_class_recall=tuple(float(r["recall"]) for r in rows),
            support=tuple(int(r["support"]) for r in rows),
            macro_f1=float(meta.pop("macro_f1")),
            n_frames=int(meta.pop("n_frames")),
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed report: {exc}") from None
    return report, meta


def write_weights_record(weights: FusionWeights, source_ids, path, **extra) -> Path:
    source_ids = list(source_ids)
    if len(source_ids) != len(weights):
        raise ValidationError(f"{len(weights)} weights for {len(source_ids)} source ids")
    meta = {"ratio": weights.ratio()}
    meta.update(extra)
    rows = [(s, fmt(w)) for s, w in zip(source_ids, weights.w)]
    return atomic_write_text(path, _kv_table(meta, ("source", "weight"), rows))


def read_weights_record(path) -> tuple[FusionWeights, list[str], dict]:
    meta, header, rows = _read_kv_table(path, "source")
    if header != ["source", "weight"]:
        raise FormatError(f"{path}: weight table header must be source,weight")
    try:
        weights = FusionWeights(tuple(float(r["weight"]) for r in rows))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return weights, [r["source"] for r in rows], meta
