"""Combiners: turn k observed labels for an item into a prediction.

Majority vote and plurality are hard and myopic; frequency is soft and
myopic; the Anonymous Bayesian Combiner (ABC) is soft and learns label
sequence probabilities from the whole rating matrix, excluding the item
being predicted.
"""

from __future__ import annotations

import math
import threading
from collections.abc import Sequence

import numpy as np

from .core import Hard, LabelSpace, RatingMatrix, Soft, ValidationError

EPSILON = 0.02


class CombinerError(ValueError):
    pass


class TooFewEligibleItems(CombinerError):
    pass


class ZeroDenominator(CombinerError):
    def __init__(self, seq_counts):
        self.seq_counts = tuple(seq_counts)
        super().__init__(f"no other item can produce label counts {self.seq_counts}; "
                         "ABC prediction is undefined")


# --------------------------------------------------------------------------
# vectorized kernels


def vote(counts: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Modal label per row, ties broken by ``uniforms`` (one per row).

    Rows of all zeros (no labels) pick uniformly among all labels.
    """
    counts = np.asarray(counts)
    top = counts == counts.max(axis=1, keepdims=True)
    n_tied = top.sum(axis=1)
    pick = np.minimum((uniforms * n_tied).astype(np.int64), n_tied - 1)
    # index of the pick-th True in each row
    rank = np.cumsum(top, axis=1) - 1
    return np.argmax(top & (rank == pick[:, None]), axis=1)


def frequency_probs(counts: np.ndarray, epsilon: float = EPSILON) -> np.ndarray:
    """Empirical label frequencies with exact 0/1 entries clipped, then renormalized."""
    counts = np.asarray(counts, dtype=np.float64)
    k = counts.sum(axis=-1, keepdims=True)
    L = counts.shape[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(k > 0, counts / np.where(k > 0, k, 1.0), 1.0 / L)
    f = np.where(f == 0.0, epsilon, np.where(f == 1.0, 1.0 - epsilon, f))
    return f / f.sum(axis=-1, keepdims=True)


def _log_factorials(n: int) -> np.ndarray:
    return np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, n + 1, dtype=np.float64)))))


_LF = _log_factorials(64)
_LF_LOCK = threading.Lock()


def _lf(n_max: int) -> np.ndarray:
    global _LF
    if n_max >= len(_LF):
        with _LF_LOCK:
            if n_max >= len(_LF):
                _LF = _log_factorials(max(n_max, 2 * len(_LF)))
    return _LF


def probability_one_item(seq_counts: Sequence[int], item_counts: Sequence[int]) -> float:
    """Chance that k ordered draws without replacement from an item's labels give
    one particular sequence with the given label counts.

    Equals prod_l C(w_l, y_l) y_l! / (C(|w|, k) k!), computed in log space as
    sum_l [ln w_l! - ln (w_l - y_l)!] - [ln |w|! - ln (|w| - k)!].
    Zero when the item lacks enough copies of some label.
    """
    y = [int(v) for v in seq_counts]
    w = [int(v) for v in item_counts]
    if any(wl < yl for wl, yl in zip(w, y)):
        return 0.0
    k, n = sum(y), sum(w)
    lf = _lf(n)
    log_p = sum(lf[wl] - lf[wl - yl] for wl, yl in zip(w, y)) - (lf[n] - lf[n - k])
    return math.exp(log_p)


# --------------------------------------------------------------------------
# ABC memo


class AbcCache:
    """Memo tables for the ABC on one rating matrix.

    ``count_memo`` maps item id to its label-count vector. ``prob_memo`` maps
    (sequence counts, item counts) to :func:`probability_one_item`; its keys
    are count vectors only, so it is valid for any matrix. ``seqprob_memo``
    maps sequence counts to the sum over all items of that probability, for
    this matrix only.

    With ``enabled=False`` nothing is remembered and every value is
    recomputed by the same arithmetic, so outputs match bit for bit.
    ``evaluations`` counts actual :func:`probability_one_item` calls.
    """

    def __init__(self, W: RatingMatrix, enabled: bool = True, prob_memo: dict | None = None):
        self.W = W
        self.enabled = enabled
        self.count_memo: dict[str, tuple[int, ...]] = {}
        self.prob_memo: dict = {} if prob_memo is None else prob_memo
        self.seqprob_memo: dict[tuple[int, ...], float] = {}
        self.evaluations = 0
        self.evaluated_pairs: set = set()
        self._lock = threading.RLock()
        self._classes = None

    def item_counts(self, item: str) -> tuple[int, ...]:
        if self.enabled and item in self.count_memo:
            return self.count_memo[item]
        L = self.W.label_space
        row = self.W.row(item)
        counts = tuple(sum(1 for lab in row if lab == ell) for ell in L)
        if self.enabled:
            self.count_memo[item] = counts
        return counts

    def classes(self):
        """Distinct item count vectors (sorted) and how many items share each."""
        if self.enabled and self._classes is not None:
            return self._classes
        table, inverse, mult = np.unique(np.asarray(self.W.label_counts), axis=0,
                                         return_inverse=True, return_counts=True)
        result = ([tuple(int(v) for v in row) for row in table], inverse.reshape(-1), mult)
        if self.enabled:
            self._classes = result
        return result

    def prob(self, seq_counts: tuple[int, ...], item_counts: tuple[int, ...]) -> float:
        key = (seq_counts, item_counts)
        if self.enabled:
            hit = self.prob_memo.get(key)
            if hit is not None:
                return hit
        with self._lock:
            if self.enabled and key in self.prob_memo:
                return self.prob_memo[key]
            value = probability_one_item(seq_counts, item_counts)
            self.evaluations += 1
            self.evaluated_pairs.add(key)
            if self.enabled:
                self.prob_memo[key] = value
        return value

    def sum_of_probabilities(self, seq_counts: tuple[int, ...]) -> tuple[float, int]:
        """Sum over items with >= k labels of their sequence probability, and their number."""
        k = sum(seq_counts)
        classes, _, mult = self.classes()
        eligible = sum(int(m) for c, m in zip(classes, mult) if sum(c) >= k)
        if self.enabled and seq_counts in self.seqprob_memo:
            return self.seqprob_memo[seq_counts], eligible
        total = 0.0
        for c, m in zip(classes, mult):
            if sum(c) >= k:
                total += float(m) * self.prob(seq_counts, c)
        if self.enabled:
            self.seqprob_memo[seq_counts] = total
        return total, eligible

    def prob_matrix(self, seqs: np.ndarray, item_classes: Sequence[tuple[int, ...]]) -> np.ndarray:
        """(len(seqs), len(item_classes)) table of probabilities."""
        out = np.empty((len(seqs), len(item_classes)))
        for a, y in enumerate(seqs):
            yt = tuple(int(v) for v in y)
            for b, c in enumerate(item_classes):
                out[a, b] = self.prob(yt, c)
        return out


def _counts_of(seq: Sequence[str], label_space: LabelSpace) -> tuple[int, ...]:
    idx = [label_space.index(s) for s in seq]
    return tuple(idx.count(i) for i in range(len(label_space)))


def label_seq_prob(seq: Sequence[str], W: RatingMatrix, excluded_item: str,
                   cache: AbcCache | None = None) -> float:
    """Estimated probability of the ordered label sequence for a random other item."""
    cache = cache if cache is not None else AbcCache(W)
    y = _counts_of(seq, W.label_space)
    k = sum(y)
    total, eligible = cache.sum_of_probabilities(y)
    ex = cache.item_counts(excluded_item)
    if sum(ex) >= k:
        total -= cache.prob(y, ex)
        eligible -= 1
    if eligible < 1:
        raise TooFewEligibleItems(f"no item other than {excluded_item!r} has {k} or more labels")
    return total / eligible


def abc_combine(seq: Sequence[str], W: RatingMatrix, excluded_item: str,
                cache: AbcCache | None = None) -> Soft:
    """Predictive distribution of the next label given the observed ones.

    Each label's weight is the estimated probability of the observed sequence
    followed by that label; weights are normalized over the labels. On a
    full rectangular matrix the normalizer is exactly the probability of the
    observed sequence itself.
    """
    cache = cache if cache is not None else AbcCache(W)
    seq = list(seq)
    nums = [label_seq_prob(seq + [ell], W, excluded_item, cache) for ell in W.label_space]
    z = sum(nums)
    if z <= 0:
        raise ZeroDenominator(_counts_of(seq, W.label_space))
    return Soft(tuple(v / z for v in nums))


# --------------------------------------------------------------------------
# single-item myopic combiners


def _generator(rng):
    from .streams import RandomSource

    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomSource):
        return rng.generator("single")
    return np.random.default_rng(rng)


def majority_vote(labels: Sequence[str], label_space: LabelSpace, rng=None) -> Hard:
    """Label chosen by more raters; ties and empty input are broken uniformly at random."""
    if len(label_space) != 2:
        raise ValidationError("majority vote is defined for binary labels; use plurality")
    return plurality(labels, label_space, rng)


def plurality(labels: Sequence[str], label_space: LabelSpace, rng=None) -> Hard:
    counts = np.array([_counts_of(labels, label_space)])
    u = _generator(rng).random(1)
    return Hard(label_space.labels[int(vote(counts, u)[0])])


def frequency(labels: Sequence[str], label_space: LabelSpace, epsilon: float = EPSILON) -> Soft:
    probs = frequency_probs(np.array(_counts_of(labels, label_space)), epsilon)
    return Soft(tuple(float(p) for p in probs))


# --------------------------------------------------------------------------
# batched combiners used by the power-curve engine


class Combiner:
    """Predicts for every item of a survey subset at once.

    ``predict`` returns ``(table, keys)``: a batched table of distinct
    predictions (shape (B or 1, n_keys) for hard output, (B or 1, n_keys,
    |L|) for soft) and each item's key into it (-1 for uncovered items).
    ``ctx`` is a :class:`power_curve.SurveyContext`.
    """

    name = "combiner"
    output_kind = "hard"
    myopic = True

    def predict(self, ctx, subset, y_counts, covered):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class Plurality(Combiner):
    name = "plurality"
    output_kind = "hard"

    def predict(self, ctx, subset, y_counts, covered):
        u = ctx.rng.uniforms(ctx.item_keys, "tiebreak", tuple(subset))
        codes = vote(y_counts, u)
        keys = np.where(covered, codes, -1)
        return np.arange(y_counts.shape[1])[None], keys


class MajorityVote(Plurality):
    name = "majority"

    def predict(self, ctx, subset, y_counts, covered):
        if y_counts.shape[1] != 2:
            raise ValidationError("majority vote is defined for binary labels; use plurality")
        return super().predict(ctx, subset, y_counts, covered)


class Frequency(Combiner):
    name = "frequency"
    output_kind = "soft"

    def __init__(self, epsilon: float = EPSILON):
        self.epsilon = epsilon

    def predict(self, ctx, subset, y_counts, covered):
        uniq, inv = np.unique(y_counts, axis=0, return_inverse=True)
        keys = np.where(covered, inv.reshape(-1), -1)
        return frequency_probs(uniq, self.epsilon)[None], keys


class AnonymousBayesian(Combiner):
    """Batched ABC.

    Under bootstrap weights the matrix is the resampled one: each copy of a
    row is a separate item and only the predicted copy is excluded. Keys
    whose item class is absent from a sample get a placeholder uniform row
    (they carry no weight there).
    """

    name = "abc"
    output_kind = "soft"
    myopic = False

    def predict(self, ctx, subset, y_counts, covered):
        cache: AbcCache = ctx.abc_cache
        classes, class_of, mult = cache.classes()
        L = y_counts.shape[1]
        pair = np.column_stack([y_counts, class_of])
        uniq, inv = np.unique(pair[covered], axis=0, return_inverse=True)
        keys = np.full(len(y_counts), -1, dtype=np.int64)
        keys[covered] = inv.reshape(-1)
        if len(uniq) == 0:
            return np.full((1, 0, L), 1.0 / L), keys
        ys, y_of_key = np.unique(uniq[:, :L], axis=0, return_inverse=True)
        y_of_key = y_of_key.reshape(-1)
        c_of_key = uniq[:, L]
        eye = np.eye(L, dtype=np.int64)
        # P[y, l, c] = probability_one_item(y + e_l, class c)
        P = np.stack([cache.prob_matrix(ys + eye[ell], classes) for ell in range(L)], axis=1)
        class_w = ctx.class_weights()
        S = np.einsum("bc,ylc->byl", class_w, P)
        num = S[:, y_of_key, :] - P[y_of_key, :, c_of_key][None]
        z = num.sum(axis=-1, keepdims=True)
        present = class_w[:, c_of_key] >= 1
        bad = present & (z[..., 0] <= 0)
        if bad.any():
            raise ZeroDenominator(ys[y_of_key[np.argwhere(bad)[0][1]]])
        with np.errstate(invalid="ignore", divide="ignore"):
            table = np.where(present[..., None], num / np.where(z > 0, z, 1.0), 1.0 / L)
        return table, keys


COMBINER_NAMES = ("majority", "plurality", "frequency", "abc")


def make_combiner(name: str) -> Combiner:
    match name:
        case "majority" | "majority-vote":
            return MajorityVote()
        case "plurality":
            return Plurality()
        case "frequency":
            return Frequency()
        case "abc" | "anonymous-bayesian":
            return AnonymousBayesian()
    raise ValidationError(f"unknown combiner {name!r}; choose from {', '.join(COMBINER_NAMES)}")
