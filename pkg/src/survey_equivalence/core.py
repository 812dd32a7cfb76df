"""Shared data types: label spaces, rating matrices, predictions and results."""

from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SOFT_SUM_TOL = 1e-9


class ValidationError(ValueError):
    """Raised when input data violates a structural invariant."""


class UnknownLabel(ValidationError):
    def __init__(self, item, position, symbol):
        self.item, self.position, self.symbol = item, position, symbol
        super().__init__(f"unknown label {symbol!r} for item {item!r} at position {position}")


class RowTooShort(ValidationError):
    def __init__(self, item, length):
        self.item, self.length = item, length
        super().__init__(f"item {item!r} has {length} label(s); at least 2 are required")


class DuplicateItemId(ValidationError):
    def __init__(self, item):
        self.item = item
        super().__init__(f"duplicate item id {item!r}")


class MatrixValidationError(ValidationError):
    """Aggregates every violation found while validating a rating matrix."""

    def __init__(self, errors: list[ValidationError]):
        self.errors = errors
        super().__init__("; ".join(str(e) for e in errors))


class NormalizationError(ValidationError):
    pass


@dataclass(frozen=True)
class LabelSpace:
    """Ordered set of label symbols; the order fixes vector indexing."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(lab) for lab in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise ValidationError("a label space needs at least 2 labels")
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate labels in {labels}")

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, label):
        return label in self._index

    @cached_property
    def _index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ValidationError(f"label {label!r} not in {self.labels}") from None


@dataclass(frozen=True)
class Hard:
    label: str


@dataclass(frozen=True)
class Soft:
    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if any(not (0.0 <= p <= 1.0) for p in probs):
            raise NormalizationError(f"probabilities out of [0, 1]: {probs}")
        if abs(math.fsum(probs) - 1.0) > SOFT_SUM_TOL:
            raise NormalizationError(f"probabilities sum to {math.fsum(probs)!r}, not 1")


Prediction = Hard | Soft


@dataclass(frozen=True)
class RatingMatrix:
    """Per-item sequences of anonymous labels; rows may have different lengths.

    Slot ``j`` of an item is its ``j``-th label. Rows are left-compacted, so an
    item has slot ``j`` exactly when ``j < len(row)``.
    """

    items: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    label_space: LabelSpace

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def max_raters(self) -> int:
        return max(len(r) for r in self.rows)

    @cached_property
    def item_index(self) -> dict[str, int]:
        return {item: i for i, item in enumerate(self.items)}

    @cached_property
    def codes(self) -> np.ndarray:
        """(n_items, K) label indices, -1 where a slot is missing."""
        out = np.full((self.n_items, self.max_raters), -1, dtype=np.int64)
        idx = self.label_space._index
        for i, row in enumerate(self.rows):
            out[i, : len(row)] = [idx[lab] for lab in row]
        out.setflags(write=False)
        return out

    @cached_property
    def lengths(self) -> np.ndarray:
        out = np.array([len(r) for r in self.rows], dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def label_counts(self) -> np.ndarray:
        """(n_items, |L|) count of each label over each item's full row."""
        L = len(self.label_space)
        c = self.codes
        out = np.zeros((self.n_items, L), dtype=np.int64)
        for lab in range(L):
            out[:, lab] = (c == lab).sum(axis=1)
        out.setflags(write=False)
        return out

    def row(self, item: str) -> tuple[str, ...]:
        return self.rows[self.item_index[item]]

    def take(self, items: Sequence[str]) -> RatingMatrix:
        return RatingMatrix(tuple(items), tuple(self.row(i) for i in items), self.label_space)

    def to_dict(self) -> dict[str, list[str]]:
        return {item: list(row) for item, row in zip(self.items, self.rows)}


def validate_matrix(rows: Mapping[str, Iterable[str]] | Iterable[tuple[str, Iterable[str]]],
                    label_space: LabelSpace | Sequence[str]) -> RatingMatrix:
    """Build a RatingMatrix, collecting every violation before raising."""
    if not isinstance(label_space, LabelSpace):
        label_space = LabelSpace(tuple(label_space))
    pairs = rows.items() if isinstance(rows, Mapping) else rows
    errors: list[ValidationError] = []
    seen: set[str] = set()
    items, out_rows = [], []
    for item, labels in pairs:
        item = str(item)
        labels = tuple(labels)
        if item in seen:
            errors.append(DuplicateItemId(item))
        seen.add(item)
        for pos, lab in enumerate(labels):
            if lab not in label_space:
                errors.append(UnknownLabel(item, pos, lab))
        if len(labels) < 2:
            errors.append(RowTooShort(item, len(labels)))
        items.append(item)
        out_rows.append(labels)
    if errors:
        if len(errors) == 1:
            raise errors[0]
        raise MatrixValidationError(errors)
    if not items:
        raise ValidationError("rating matrix has no items")
    return RatingMatrix(tuple(items), tuple(out_rows), label_space)


@dataclass(frozen=True)
class PredictionSet:
    """Classifier outputs for every item; all hard or all soft."""

    predictions: Mapping[str, Prediction]
    label_space: LabelSpace
    kind: str = field(init=False)

    def __post_init__(self):
        preds = dict(self.predictions)
        object.__setattr__(self, "predictions", preds)
        kinds = {type(p) for p in preds.values()}
        if len(kinds) > 1:
            raise ValidationError("prediction set mixes hard and soft predictions")
        kind = "soft" if kinds == {Soft} else "hard"
        for item, p in preds.items():
            if isinstance(p, Hard) and p.label not in self.label_space:
                raise UnknownLabel(item, 0, p.label)
            if isinstance(p, Soft) and len(p.probs) != len(self.label_space):
                raise ValidationError(f"item {item!r}: {len(p.probs)} probabilities for "
                                      f"{len(self.label_space)} labels")
        object.__setattr__(self, "kind", kind)

    def __getitem__(self, item):
        return self.predictions[item]

    def __len__(self):
        return len(self.predictions)

    def check_covers(self, matrix: RatingMatrix):
        missing = [i for i in matrix.items if i not in self.predictions]
        if missing:
            raise MissingItem(missing[0])

    def as_array(self, items: Sequence[str]) -> np.ndarray:
        """Label codes (n,) for hard sets; probability rows (n, |L|) for soft sets."""
        if self.kind == "hard":
            return np.array([self.label_space.index(self.predictions[i].label) for i in items],
                            dtype=np.int64)
        return np.array([self.predictions[i].probs for i in items], dtype=np.float64)

    @classmethod
    def from_hard(cls, labels: Mapping[str, str], label_space: LabelSpace) -> PredictionSet:
        return cls({i: Hard(lab) for i, lab in labels.items()}, label_space)

    @classmethod
    def from_soft(cls, probs: Mapping[str, Sequence[float]], label_space: LabelSpace) -> PredictionSet:
        return cls({i: Soft(tuple(p)) for i, p in probs.items()}, label_space)


class MissingItem(ValidationError):
    def __init__(self, item):
        self.item = item
        super().__init__(f"no prediction for item {item!r}")


@dataclass(frozen=True)
class PowerCurve:
    k_values: tuple[int, ...]
    means: tuple[float, ...]
    ci_low: tuple[float, ...] | None = None
    ci_high: tuple[float, ...] | None = None
    classifier_score: float | None = None
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        ks = tuple(int(k) for k in self.k_values)
        if not ks or ks[0] != 0 or any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValidationError(f"k values must increase from 0: {ks}")
        means = tuple(float(m) for m in self.means)
        if len(means) != len(ks) or not all(math.isfinite(m) for m in means):
            raise ValidationError("power curve needs one finite mean per k")
        object.__setattr__(self, "k_values", ks)
        object.__setattr__(self, "means", means)

    def __len__(self):
        return len(self.k_values)

    def shifted(self, delta: float) -> PowerCurve:
        return PowerCurve(self.k_values, tuple(m + delta for m in self.means))


class Sentinel(enum.Enum):
    LESS_THAN_ZERO = "less_than_zero"
    MORE_THAN_K = "more_than_k"

    def __str__(self):
        return "less than 0" if self is Sentinel.LESS_THAN_ZERO else "more than K"


@dataclass(frozen=True)
class EquivalenceResult:
    """Survey equivalence: a fractional survey size or a sentinel."""

    value: float | Sentinel
    bootstrap_values: tuple[float | Sentinel, ...] | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    h_score: float | None = None
    curve: PowerCurve | None = None

    def __post_init__(self):
        if self.ci_low is not None and self.ci_high is not None and self.ci_low > self.ci_high:
            raise ValidationError("ci_low exceeds ci_high")
        if isinstance(self.value, (int, float)) and not isinstance(self.value, Sentinel):
            if self.value < 0:
                raise ValidationError("survey equivalence cannot be negative")

    @property
    def is_sentinel(self) -> bool:
        return isinstance(self.value, Sentinel)

    @property
    def numeric_bootstrap(self) -> list[float]:
        return [v for v in (self.bootstrap_values or ()) if not isinstance(v, Sentinel)]

    @property
    def bootstrap_mean(self) -> float | None:
        vals = self.numeric_bootstrap
        return float(np.mean(vals)) if vals else None

    @property
    def sentinel_counts(self) -> dict[str, int]:
        counts = {s.value: 0 for s in Sentinel}
        for v in self.bootstrap_values or ():
            if isinstance(v, Sentinel):
                counts[v.value] += 1
        return counts

    def interpretation(self) -> str:
        return interpret_fraction(self.value)


def interpret_fraction(value: float | Sentinel) -> str:
    """Read a fractional survey size as a randomized mix of two survey sizes.

    >>> interpret_fraction(4.77)
    '4.77 = 0.77 * 5 + 0.23 * 4: survey 5 raters for 77% of items and 4 for the rest'
    """
    if isinstance(value, Sentinel):
        return f"survey equivalence is {value}"
    lo = math.floor(value)
    frac = value - lo
    if frac < 1e-12:
        return f"{value:g} = exactly {lo} raters"
    rest = str(lo) if lo > 0 else "the base rate"
    return (f"{value:.2f} = {frac:.2f} * {lo + 1} + {1 - frac:.2f} * {lo}: "
            f"survey {lo + 1} raters for {100 * frac:.0f}% of items and {rest} for the rest")
