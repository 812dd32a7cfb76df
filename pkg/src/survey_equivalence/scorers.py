"""Scoring functions and reference-rater scoring.

Each scorer exists in two forms. The module-level functions
(``agreement_score``, ``cross_entropy_score``, ...) score explicit
(prediction, label) arrays. The :class:`Scorer` objects score *grouped*
data: a table of distinct predictions plus a contingency array counting how
often each distinct prediction met each reference label. The grouped form
accepts item weights, which is how bootstrap resamples are scored without
materializing resampled matrices.

All logarithms are base 2, so cross-entropy reads in bits.
"""

from __future__ import annotations

import warnings
from collections.abc import Sequence

import numpy as np
from scipy import sparse

from .core import Hard, LabelSpace, PredictionSet, RatingMatrix, Soft, ValidationError


class ScoringError(ValueError):
    pass


class EmptyInput(ScoringError):
    pass


class ZeroProbabilityLabel(ScoringError):
    def __init__(self, item=None):
        self.item = item
        where = f" for item {item!r}" if item is not None else ""
        super().__init__(f"prediction assigns zero probability to the realized label{where}")


class DegenerateLabels(ScoringError):
    pass


class InsufficientRaters(ScoringError):
    def __init__(self, item, needed):
        self.item = item
        super().__init__(f"item {item!r} has fewer than {needed} labels")


class DegenerateScoreWarning(UserWarning):
    pass


def _weights(n, weights):
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError("weights must have one entry per pair")
    return w


def _check_nonempty(labels):
    if len(labels) == 0:
        raise EmptyInput("no (prediction, label) pairs to score")


def agreement_score(predictions, labels, weights=None) -> float:
    """Fraction of pairs whose hard prediction equals the reference label."""
    p, y = np.asarray(predictions), np.asarray(labels)
    _check_nonempty(y)
    w = _weights(len(y), weights)
    return float(np.sum(w * (p == y)) / np.sum(w))


def f1_score(predictions, labels, positive, weights=None) -> float:
    p, y = np.asarray(predictions), np.asarray(labels)
    _check_nonempty(y)
    w = _weights(len(y), weights)
    tp = np.sum(w * ((p == positive) & (y == positive)))
    fp = np.sum(w * ((p == positive) & (y != positive)))
    fn = np.sum(w * ((p != positive) & (y == positive)))
    denom = 2 * tp + fp + fn
    if denom == 0:
        warnings.warn("F1 undefined without any positives; scoring 0", DegenerateScoreWarning,
                      stacklevel=2)
        return 0.0
    return float(2 * tp / denom)


def cross_entropy_score(probs, labels, weights=None) -> float:
    """Mean base-2 log probability of the realized labels (bits, <= 0)."""
    probs = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    _check_nonempty(y)
    w = _weights(len(y), weights)
    realized = probs[np.arange(len(y)), y]
    bad = np.flatnonzero((realized <= 0) & (w > 0))
    if bad.size:
        raise ZeroProbabilityLabel(int(bad[0]))
    with np.errstate(divide="ignore"):
        logs = np.where(w > 0, np.log2(np.where(realized > 0, realized, 1.0)), 0.0)
    return float(np.sum(w * logs) / np.sum(w))


def auc_score(probs, labels, positive, weights=None) -> float:
    """Mann-Whitney AUC of P(positive) for positive vs other labels; ties count 1/2."""
    probs = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels)
    _check_nonempty(y)
    w = _weights(len(y), weights)
    s = probs[:, positive] if probs.ndim == 2 else probs
    pos = y == positive
    wp, wn = w * pos, w * ~pos
    if wp.sum() == 0 or wn.sum() == 0:
        raise DegenerateLabels("AUC needs at least one positive and one negative reference label")
    return _auc_grouped(s, wp, wn)


def _auc_grouped(scores, pos_w, neg_w) -> float:
    values, inv = np.unique(scores, return_inverse=True)
    P = np.bincount(inv, weights=pos_w, minlength=len(values))
    N = np.bincount(inv, weights=neg_w, minlength=len(values))
    neg_below = np.concatenate(([0.0], np.cumsum(N)[:-1]))
    return float(np.sum(P * (neg_below + 0.5 * N)) / (P.sum() * N.sum()))


def joint_frequency_matrix(predictions, labels, n_labels, weights=None) -> np.ndarray:
    """Rows index the classifier output, columns the reference label; cells sum to 1."""
    y = np.asarray(labels, dtype=np.int64)
    _check_nonempty(y)
    w = _weights(len(y), weights)
    p = np.asarray(predictions)
    if p.ndim == 1:
        p = np.eye(n_labels)[p]
    M = np.zeros((n_labels, n_labels))
    for c2 in range(n_labels):
        M[:, c2] = (w[y == c2, None] * p[y == c2]).sum(axis=0)
    return M / w.sum()


def dmi_score(predictions, labels, n_labels, weights=None) -> float:
    """|det| of the empirical joint frequency matrix of outputs and labels."""
    return float(abs(np.linalg.det(joint_frequency_matrix(predictions, labels, n_labels, weights))))


# --------------------------------------------------------------------------
# grouped scoring


def contingency(keys, refs, n_keys, n_labels, weights=None) -> np.ndarray:
    """Count (prediction key, reference label) co-occurrences per reference.

    keys: (n,) prediction key per item, -1 for items without a prediction.
    refs: (R, n) reference label per item, -1 where missing.
    weights: None or (B, n) item multiplicities.
    Returns (B, R, n_keys, n_labels); B is 1 when weights is None.
    """
    keys = np.asarray(keys, dtype=np.int64)
    refs = np.atleast_2d(np.asarray(refs, dtype=np.int64))
    R, n = refs.shape
    valid = (refs >= 0) & (keys >= 0)[None, :]
    r_idx, i_idx = np.nonzero(valid)
    cols = (r_idx * n_keys + keys[i_idx]) * n_labels + refs[r_idx, i_idx]
    size = R * n_keys * n_labels
    if weights is None:
        return np.bincount(cols, minlength=size).astype(np.float64).reshape(1, R, n_keys, n_labels)
    weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    S = sparse.csr_matrix((np.ones(len(cols)), (cols, i_idx)), shape=(size, n))
    counts = np.asarray(S @ weights.T).T
    return counts.reshape(weights.shape[0], R, n_keys, n_labels)


def _ratio(num, den):
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


class Scorer:
    """A scoring function over grouped (prediction, reference) counts.

    ``table`` holds the distinct predictions: label codes shaped (B, n_keys)
    for hard input, probability rows shaped (B, n_keys, |L|) for soft input
    (B may be 1 and broadcasts). ``counts`` is the output of
    :func:`contingency`. ``from_counts`` returns (B, R) scores with NaN for
    references that received no mass.
    """

    name = "scorer"
    input_kind = "any"

    def accepts(self, kind: str) -> bool:
        return self.input_kind in ("any", kind)

    def from_counts(self, table, counts) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, predictions, labels, n_labels, weights=None) -> float:
        """Score explicit arrays through the grouped route."""
        p = np.asarray(predictions)
        y = np.asarray(labels, dtype=np.int64)
        _check_nonempty(y)
        if p.ndim == 1:
            table, keys = np.unique(p, return_inverse=True)
        else:
            table, keys = np.unique(p, axis=0, return_inverse=True)
        counts = contingency(keys.reshape(-1), y[None, :], len(table), n_labels,
                             None if weights is None else np.asarray(weights)[None, :])
        return float(self.from_counts(table[None], counts)[0, 0])

    def __repr__(self):
        return f"{type(self).__name__}()"


def _onehot(table, n_labels):
    return np.eye(n_labels)[np.asarray(table, dtype=np.int64)]


class Agreement(Scorer):
    name = "agreement"
    input_kind = "hard"

    def from_counts(self, table, counts):
        hit = _onehot(table, counts.shape[-1])[:, None]
        return _ratio((counts * hit).sum(axis=(-2, -1)), counts.sum(axis=(-2, -1)))


class F1(Scorer):
    name = "f1"
    input_kind = "hard"

    def __init__(self, positive: int = 0):
        self.positive = int(positive)

    def from_counts(self, table, counts):
        pos = self.positive
        pred_pos = (np.asarray(table) == pos)[:, None]
        actual = counts[..., pos]
        rest = counts.sum(axis=-1) - actual
        tp = (pred_pos * actual).sum(-1)
        fp = (pred_pos * rest).sum(-1)
        fn = (~pred_pos * actual).sum(-1)
        denom = 2 * tp + fp + fn
        total = counts.sum(axis=(-2, -1))
        out = _ratio(2 * tp, denom)
        degenerate = (total > 0) & (denom == 0)
        if degenerate.any():
            warnings.warn("F1 undefined without any positives; scoring 0",
                          DegenerateScoreWarning, stacklevel=2)
            out = np.where(degenerate, 0.0, out)
        return out

    def __repr__(self):
        return f"F1(positive={self.positive})"


class CrossEntropy(Scorer):
    name = "cross-entropy"
    input_kind = "soft"

    def from_counts(self, table, counts):
        probs = np.asarray(table, dtype=np.float64)[:, None]
        if np.any((probs <= 0) & (counts > 0)):
            raise ZeroProbabilityLabel()
        with np.errstate(divide="ignore"):
            logs = np.log2(np.where(probs > 0, probs, 1.0))
        return _ratio((counts * logs).sum(axis=(-2, -1)), counts.sum(axis=(-2, -1)))


class AUC(Scorer):
    name = "auc"
    input_kind = "soft"

    def __init__(self, positive: int = 0):
        self.positive = int(positive)

    def from_counts(self, table, counts):
        table = np.asarray(table, dtype=np.float64)
        B, R = counts.shape[:2]
        out = np.full((B, R), np.nan)
        for b in range(B):
            scores = table[min(b, table.shape[0] - 1), :, self.positive]
            for r in range(R):
                pos_w = counts[b, r, :, self.positive]
                neg_w = counts[b, r].sum(-1) - pos_w
                if pos_w.sum() > 0 and neg_w.sum() > 0:
                    out[b, r] = _auc_grouped(scores, pos_w, neg_w)
        return out

    def __repr__(self):
        return f"AUC(positive={self.positive})"


class DMI(Scorer):
    name = "dmi"
    input_kind = "any"

    def from_counts(self, table, counts):
        L = counts.shape[-1]
        table = np.asarray(table)
        P = _onehot(table, L) if table.ndim == 2 else table.astype(np.float64)
        M = np.einsum("bkc,brkd->brcd", P, counts)
        total = counts.sum(axis=(-2, -1))
        M = M / np.where(total > 0, total, 1.0)[..., None, None]
        return np.where(total > 0, np.abs(np.linalg.det(M)), np.nan)


SCORER_NAMES = ("agreement", "f1", "auc", "cross-entropy", "dmi")


def make_scorer(name: str, positive: int | None = None) -> Scorer:
    if name in ("f1", "auc") and positive is None:
        raise ValidationError(f"scorer {name!r} needs a positive label")
    match name:
        case "agreement":
            return Agreement()
        case "f1":
            return F1(positive)
        case "auc":
            return AUC(positive)
        case "cross-entropy" | "ce":
            return CrossEntropy()
        case "dmi":
            return DMI()
    raise ValidationError(f"unknown scorer {name!r}; choose from {', '.join(SCORER_NAMES)}")


# --------------------------------------------------------------------------
# reference-rater scoring


def prediction_table(predictions: PredictionSet, items: Sequence[str]):
    """Distinct predictions and each item's key into them."""
    arr = predictions.as_array(items)
    if predictions.kind == "hard":
        return np.arange(len(predictions.label_space)), arr
    table, keys = np.unique(arr, axis=0, return_inverse=True)
    return table, keys.reshape(-1)


def score_references(scorer: Scorer, table, keys, refs, n_labels, weights=None) -> np.ndarray:
    """Mean over references of the per-reference score; shape (B,).

    ``table`` is batched: (B or 1, n_keys) hard codes or (B or 1, n_keys, |L|)
    probabilities. References that receive no mass are skipped.
    """
    table = np.asarray(table)
    counts = contingency(keys, refs, table.shape[1], n_labels, weights)
    per_ref = scorer.from_counts(table, counts)
    if not (~np.isnan(per_ref)).any(axis=1).all():
        raise DegenerateLabels(f"{scorer.name}: no reference produced a defined score")
    return np.nanmean(per_ref, axis=1)


def _check_kind(scorer: Scorer, predictions: PredictionSet):
    if not scorer.accepts(predictions.kind):
        raise ValidationError(f"scorer {scorer.name!r} does not accept {predictions.kind} predictions")


def hscore(predictions: PredictionSet, W: RatingMatrix, scorer: Scorer) -> float:
    """Mean over rater slots of the score against that slot's labels.

    Each slot is scored on the items that have it.
    """
    _check_kind(scorer, predictions)
    predictions.check_covers(W)
    table, keys = prediction_table(predictions, W.items)
    return float(score_references(scorer, table[None], keys, W.codes.T, len(W.label_space))[0])


def hscore_r(predictions: PredictionSet, W: RatingMatrix, scorer: Scorer, r: int,
             rng=None, cap: int = 200) -> float:
    """Score against the plurality label of ``r`` reference raters.

    Averages over every size-``r`` slot subset (or ``cap`` sampled ones);
    plurality ties are broken at random per (subset, item).
    """
    from .power_curve import reference_labels, rater_subsets
    from .streams import as_source

    if r < 1:
        raise ValueError("r must be at least 1")
    short = np.flatnonzero(W.lengths < r)
    if short.size:
        raise InsufficientRaters(W.items[short[0]], r)
    _check_kind(scorer, predictions)
    predictions.check_covers(W)
    rng = as_source(rng)
    table, keys = prediction_table(predictions, W.items)
    plan = rater_subsets(W.max_raters, r, rng.generator("hscore_r", r), cap=cap)
    refs = reference_labels(W, plan.subsets, rng)
    return float(score_references(scorer, table[None], keys, refs, len(W.label_space))[0])


def score_pairs(scorer: Scorer, pairs, label_space: LabelSpace) -> float:
    """Score (Prediction, label symbol) pairs with a grouped scorer."""
    pairs = list(pairs)
    _check_nonempty(pairs)
    y = [label_space.index(lab) for _, lab in pairs]
    if all(isinstance(p, Hard) for p, _ in pairs):
        preds = [label_space.index(p.label) for p, _ in pairs]
    elif all(isinstance(p, Soft) for p, _ in pairs):
        preds = [p.probs for p, _ in pairs]
    else:
        raise ValidationError("pairs mix hard and soft predictions")
    return scorer(np.asarray(preds), y, len(label_space))


def krippendorff_alpha(W: RatingMatrix) -> float:
    """Nominal Krippendorff's alpha over a possibly ragged matrix.

    Built from the coincidence matrix: each item with m >= 2 labels
    contributes every ordered pair of its labels with weight 1/(m-1).
    Returns 1.0 with a :class:`DegenerateScoreWarning` when only one label
    value occurs (alpha is undefined there).
    """
    counts = W.label_counts[W.lengths >= 2].astype(np.float64)
    if counts.size == 0:
        raise DegenerateLabels("alpha needs an item with at least 2 labels")
    m = counts.sum(axis=1)
    # o[c, k] = sum_u n_uc (n_uk - [c == k]) / (m_u - 1)
    o = np.einsum("uc,uk->ck", counts / (m - 1)[:, None], counts)
    o -= np.diag((counts / (m - 1)[:, None]).sum(axis=0))
    n_c = o.sum(axis=1)
    n = n_c.sum()
    disagree_obs = o.sum() - np.trace(o)
    disagree_exp = n_c.sum() ** 2 - np.sum(n_c**2)
    if disagree_exp == 0:
        warnings.warn("only one label value occurs; alpha is undefined, reporting 1.0",
                      DegenerateScoreWarning, stacklevel=2)
        return 1.0
    return float(1.0 - (n - 1) * disagree_obs / disagree_exp)
