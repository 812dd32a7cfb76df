"""CSV and JSON formats, plus discrete calibration of classifier outputs."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Mapping, Sequence
from pathlib import Path

import numpy as np

from .core import (LabelSpace, NormalizationError, PowerCurve, PredictionSet, RatingMatrix, Soft,
                   ValidationError, validate_matrix)

SOFT_ROW_TOL = 1e-6
SCHEMA_VERSION = "1"


class ParseError(ValidationError):
    def __init__(self, path, line: int, column: int, message: str):
        self.path, self.line, self.column = str(path), line, column
        super().__init__(f"{path}:{line}:{column}: {message}")


class EmptyBucket(ValidationError):
    pass


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(path, 1, 1, "file is empty")
    return rows


def load_ratings_csv(path, labels: Sequence[str] | LabelSpace | None = None) -> RatingMatrix:
    """Read ``item,r1,...,rK``; empty cells are missing labels and may only trail.

    The label space is the sorted set of observed labels unless given.
    """
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "item":
        raise ParseError(path, 1, 1, "header must start with 'item' followed by rater columns")
    data = []
    for line, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) > len(header):
            raise ParseError(path, line, len(header) + 1, "more cells than header columns")
        item, *cells = (c.strip() for c in row)
        if not item:
            raise ParseError(path, line, 1, "missing item id")
        filled = [bool(c) for c in cells]
        if any(filled[j] and not filled[j - 1] for j in range(1, len(filled))):
            gap = filled.index(False) + 2
            raise ParseError(path, line, gap, "empty cell before a filled one; only trailing cells may be empty")
        data.append((item, [c for c in cells if c]))
    if not data:
        raise ParseError(path, 2, 1, "no rating rows")
    if labels is None:
        labels = sorted({lab for _, row in data for lab in row})
        if len(labels) < 2:
            raise ValidationError(f"{path}: only {len(labels)} distinct label(s); pass --labels")
    return validate_matrix(data, labels)


def load_predictions_csv(path, label_space: LabelSpace) -> PredictionSet:
    """Read ``item,label`` (hard) or ``item,p_<label>,...`` (soft, label-space order)."""
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "item":
        raise ParseError(path, 1, 1, "header must start with 'item'")
    soft_cols = [f"p_{lab}" for lab in label_space]
    if header[1:] == soft_cols:
        kind = "soft"
    elif len(header) == 2:
        kind = "hard"
    else:
        raise ParseError(path, 1, 2, f"expected 'item,label' or 'item,{','.join(soft_cols)}'")
    preds: dict[str, object] = {}
    for line, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(path, line, min(len(row), len(header)) + 1,
                             f"expected {len(header)} cells, found {len(row)}")
        item, *cells = (c.strip() for c in row)
        if item in preds:
            raise ParseError(path, line, 1, f"duplicate item id {item!r}")
        if kind == "hard":
            if cells[0] not in label_space:
                raise ParseError(path, line, 2, f"unknown label {cells[0]!r}")
            preds[item] = cells[0]
            continue
        try:
            probs = [float(c) for c in cells]
        except ValueError:
            raise ParseError(path, line, 2, "probabilities must be numbers") from None
        total = math.fsum(probs)
        if any(not (0.0 <= p <= 1.0) for p in probs) or abs(total - 1.0) > SOFT_ROW_TOL:
            raise NormalizationError(f"{path}:{line}: probabilities {probs} sum to {total!r}")
        preds[item] = Soft(tuple(p / total for p in probs))
    if kind == "hard":
        return PredictionSet.from_hard(preds, label_space)
    return PredictionSet(preds, label_space)


def write_ratings_csv(path, W: RatingMatrix) -> None:
    K = W.max_raters
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["item", *(f"r{j + 1}" for j in range(K))])
        for item, row in zip(W.items, W.rows):
            out.writerow([item, *row, *([""] * (K - len(row)))])


def write_predictions_csv(path, predictions: PredictionSet, items: Sequence[str] | None = None) -> None:
    items = list(predictions.predictions) if items is None else items
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        if predictions.kind == "hard":
            out.writerow(["item", "label"])
            for i in items:
                out.writerow([i, predictions[i].label])
        else:
            out.writerow(["item", *(f"p_{lab}" for lab in predictions.label_space)])
            for i in items:
                out.writerow([i, *(repr(p) for p in predictions[i].probs)])


def write_plot_csv(path, curve: PowerCurve, classifier_score: float | None) -> None:
    """``k,mean,ci_low,ci_high`` per k, then a ``classifier,<score>`` row."""
    low = curve.ci_low or (None,) * len(curve)
    high = curve.ci_high or (None,) * len(curve)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["k", "mean", "ci_low", "ci_high"])
        for k, m, lo, hi in zip(curve.k_values, curve.means, low, high):
            out.writerow([k, repr(m), "" if lo is None else repr(float(lo)),
                          "" if hi is None else repr(float(hi))])
        out.writerow(["classifier", "" if classifier_score is None else repr(float(classifier_score))])


def write_json(path, document: Mapping) -> None:
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def calibrate_discrete(predictions: PredictionSet, W: RatingMatrix, positive_label: str) -> PredictionSet:
    """Map each distinct classifier output to the observed positive-label rate.

    The rate pools every human label of every item that received that
    output. Only binary label spaces are supported; the remaining mass goes
    to the other label.
    """
    space = W.label_space
    if len(space) != 2:
        raise ValidationError("calibration supports binary label spaces")
    pos = space.index(positive_label)
    predictions.check_covers(W)
    outputs = [_output_key(predictions[i]) for i in W.items]
    buckets: dict[object, list[int]] = {}
    for idx, key in enumerate(outputs):
        buckets.setdefault(key, []).append(idx)
    counts = W.label_counts
    rate = {}
    for key, idx in buckets.items():
        labels = counts[idx].sum()
        if labels == 0:
            raise EmptyBucket(f"no labels for classifier output {key!r}")
        rate[key] = float(counts[idx, pos].sum() / labels)
    calibrated = {}
    for item, key in zip(W.items, outputs):
        probs = [0.0, 0.0]
        probs[pos] = rate[key]
        probs[1 - pos] = 1.0 - rate[key]
        calibrated[item] = Soft(tuple(probs))
    return PredictionSet(calibrated, space)


def _output_key(pred):
    return pred.label if hasattr(pred, "label") else pred.probs


def jsonable(value):
    """Convert numpy scalars/arrays and tuples to plain JSON types."""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value
