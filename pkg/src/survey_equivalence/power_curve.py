"""Survey power curves with item-bootstrap error bars.

The engine evaluates all bootstrap samples at once. A resampled matrix is
represented by per-item multiplicities rather than copied rows, so each
(k, subset) is combined once and scored for every sample with one sparse
product (see :func:`scorers.contingency`). Sample 0 always carries unit
weights and is the full-data point estimate.

Items are processed in sorted-id order and all randomness is keyed by
(task, item id), so shuffling the input rows or changing the number of
worker threads leaves results bit-identical.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .combiners import AbcCache, Combiner, vote
from .core import PowerCurve, PredictionSet, RatingMatrix, ValidationError
from .scorers import (DegenerateLabels, Scorer, _check_kind, contingency, prediction_table)
from .streams import RandomSource, as_source, item_keys

SUBSET_CAP = 200


@dataclass(frozen=True)
class SubsetPlan:
    k: int
    subsets: tuple[tuple[int, ...], ...]

    def __len__(self):
        return len(self.subsets)


def rater_subsets(raters: int | Sequence[int], k: int, rng=None, cap: int = SUBSET_CAP) -> SubsetPlan:
    """All size-k subsets of the rater slots, or ``cap`` distinct random ones.

    ``raters`` is a slot count K (slots 0..K-1) or an explicit slot list.
    """
    slots = list(range(raters)) if isinstance(raters, (int, np.integer)) else sorted(raters)
    if not 0 <= k <= len(slots):
        raise ValueError(f"subset size {k} outside 0..{len(slots)}")
    if math.comb(len(slots), k) <= cap:
        return SubsetPlan(k, tuple(itertools.combinations(slots, k)))
    gen = rng if isinstance(rng, np.random.Generator) else as_source(rng).generator("subsets", k)
    seen: dict[tuple[int, ...], None] = {}
    while len(seen) < cap:
        pick = tuple(sorted(int(s) for s in gen.choice(slots, size=k, replace=False)))
        seen.setdefault(pick, None)
    return SubsetPlan(k, tuple(seen))


def reference_labels(W: RatingMatrix, tuples: Sequence[tuple[int, ...]], rng=None) -> np.ndarray:
    """Plurality label of each slot tuple per item; shape (len(tuples), n).

    -1 where an item lacks one of the slots. Ties are broken by a uniform
    keyed on (tuple, item id).
    """
    rng = as_source(rng)
    keys = item_keys(W.items)
    out = np.empty((len(tuples), W.n_items), dtype=np.int64)
    for t, slots in enumerate(tuples):
        out[t] = _plurality_of_slots(W, slots, rng, keys)
    return out


def _plurality_of_slots(W, slots, rng, keys):
    slots = tuple(slots)
    if len(slots) == 1:
        return W.codes[:, slots[0]]
    has = W.lengths > max(slots)
    labels = _slot_counts(W, slots)
    winners = vote(labels, rng.uniforms(keys, "reference", slots))
    return np.where(has, winners, -1)


def _slot_counts(W: RatingMatrix, slots) -> np.ndarray:
    L = len(W.label_space)
    if not slots:
        return np.zeros((W.n_items, L), dtype=np.int64)
    sub = W.codes[:, list(slots)]
    return np.stack([(sub == lab).sum(axis=1) for lab in range(L)], axis=1)


class SurveyContext:
    """Per-run state shared by every (k, subset) task."""

    def __init__(self, W: RatingMatrix, combiner: Combiner, scorer: Scorer, rng: RandomSource,
                 weights: np.ndarray, ref_r: int = 1, cap: int = SUBSET_CAP,
                 abc_cache: AbcCache | None = None):
        self.W = W
        self.combiner = combiner
        self.scorer = scorer
        self.rng = rng
        self.weights = weights
        self.ref_r = ref_r
        self.cap = cap
        self.item_keys = item_keys(W.items)
        self.abc_cache = abc_cache if abc_cache is not None else AbcCache(W)
        self._class_w = None
        self._ref_cache: dict[tuple[int, ...], np.ndarray] = {}

    @property
    def n_labels(self) -> int:
        return len(self.W.label_space)

    def class_weights(self) -> np.ndarray:
        """(B, n_classes) total multiplicity of each distinct item count vector."""
        if self._class_w is None:
            classes, class_of, _ = self.abc_cache.classes()
            onehot = np.zeros((self.W.n_items, len(classes)))
            onehot[np.arange(self.W.n_items), class_of] = 1.0
            self._class_w = self.weights @ onehot
        return self._class_w

    def plurality(self, slots: tuple[int, ...]) -> np.ndarray:
        hit = self._ref_cache.get(slots)
        if hit is None:
            hit = _plurality_of_slots(self.W, slots, self.rng, self.item_keys)
            self._ref_cache[slots] = hit
        return hit

    def references(self, used: tuple[int, ...]) -> np.ndarray:
        unused = [j for j in range(self.W.max_raters) if j not in used]
        if self.ref_r == 1:
            return self.W.codes[:, unused].T
        plan = rater_subsets(unused, self.ref_r, self.rng.generator("references", used), self.cap)
        return np.stack([self.plurality(t) for t in plan.subsets])


def _per_sample_score(scorer, table, keys, refs, n_labels, weights) -> np.ndarray:
    counts = contingency(keys, refs, np.asarray(table).shape[1], n_labels, weights)
    per_ref = scorer.from_counts(table, counts)
    with np.errstate(invalid="ignore"):
        defined = ~np.isnan(per_ref)
        total = np.where(defined, per_ref, 0.0).sum(axis=1)
        n = defined.sum(axis=1)
    return np.where(n > 0, total / np.maximum(n, 1), np.nan)


def _score_subset(ctx: SurveyContext, subset: tuple[int, ...]):
    W = ctx.W
    covered = W.lengths > max(subset) if subset else np.ones(W.n_items, dtype=bool)
    y = _slot_counts(W, subset)
    try:
        table, keys = ctx.combiner.predict(ctx, subset, y, covered)
        scores = _per_sample_score(ctx.scorer, table, keys, ctx.references(subset),
                                   ctx.n_labels, ctx.weights)
    except ValueError as exc:
        exc.args = (f"{exc} (survey size {len(subset)}, rater slots {subset})",)
        raise
    return scores, float(covered.mean())


def _plans(K: int, ref_r: int, rng: RandomSource, cap: int) -> list[SubsetPlan]:
    return [rater_subsets(K, k, rng.generator("subsets", k), cap) for k in range(K - ref_r + 1)]


def _canonical(W: RatingMatrix) -> RatingMatrix:
    order = sorted(W.items)
    return W if list(W.items) == order else W.take(order)


def _check_inputs(W: RatingMatrix, combiner: Combiner, scorer: Scorer, ref_r: int):
    if not scorer.accepts(combiner.output_kind):
        raise ValidationError(f"scorer {scorer.name!r} cannot score {combiner.output_kind} "
                              f"predictions from combiner {combiner.name!r}")
    if ref_r < 1:
        raise ValidationError("ref_r must be at least 1")
    if W.max_raters < ref_r + 1:
        raise ValidationError(f"need at least {ref_r + 1} rater slots for ref_r={ref_r}")


def _run(W, combiner, scorer, rng, weights, ref_r, cap, jobs, abc_cache=None):
    """(B, n_k) curve values and per-k mean coverage."""
    ctx = SurveyContext(W, combiner, scorer, rng, weights, ref_r, cap, abc_cache)
    plans = _plans(W.max_raters, ref_r, rng, cap)
    tasks = [(k, s) for k, plan in enumerate(plans) for s in plan.subsets]
    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda t: _score_subset(ctx, t[1]), tasks))
    else:
        results = [_score_subset(ctx, s) for _, s in tasks]
    B = weights.shape[0]
    means = np.empty((B, len(plans)))
    coverage = np.empty(len(plans))
    start = 0
    for k, plan in enumerate(plans):
        block = np.stack([r[0] for r in results[start:start + len(plan)]], axis=1)
        coverage[k] = np.mean([r[1] for r in results[start:start + len(plan)]])
        start += len(plan)
        defined = ~np.isnan(block)
        if not defined.any(axis=1).all():
            raise DegenerateLabels(f"{scorer.name}: no subset of size {k} produced a defined score")
        means[:, k] = np.where(defined, block, 0.0).sum(axis=1) / defined.sum(axis=1)
    return means, coverage, ctx


def _metadata(combiner, scorer, n_samples, seed, ref_r, cap, coverage):
    return {
        "combiner": combiner.name,
        "scorer": scorer.name,
        "bootstrap": n_samples,
        "seed": seed,
        "ref_r": ref_r,
        "subset_cap": cap,
        "coverage": [float(c) for c in coverage],
    }


def spc(W: RatingMatrix, combiner: Combiner, scorer: Scorer, rng=None, ref_r: int = 1,
        cap: int = SUBSET_CAP, jobs: int = 1, abc_cache: AbcCache | None = None) -> PowerCurve:
    """Expected score of a k-rater survey against held-out raters, k = 0..K-ref_r."""
    W = _canonical(W)
    _check_inputs(W, combiner, scorer, ref_r)
    rng = as_source(rng)
    weights = np.ones((1, W.n_items))
    means, coverage, _ = _run(W, combiner, scorer, rng, weights, ref_r, cap, jobs, abc_cache)
    return PowerCurve(tuple(range(means.shape[1])), tuple(means[0]),
                      metadata=_metadata(combiner, scorer, 0, rng.seed, ref_r, cap, coverage))


def bootstrap_weights(n_items: int, n_samples: int, rng: RandomSource, resample: bool = True) -> np.ndarray:
    """(1 + n_samples, n) item multiplicities; row 0 is the full data."""
    rows = [np.ones(n_items)]
    for b in range(n_samples):
        if resample:
            gen = rng.generator("bootstrap", b)
            rows.append(gen.multinomial(n_items, np.full(n_items, 1.0 / n_items)).astype(np.float64))
        else:
            rows.append(np.ones(n_items))
    return np.vstack(rows)


def percentile_band(values: np.ndarray, axis: int = 0, level: float = 95.0):
    tail = (100.0 - level) / 2
    return (np.percentile(values, tail, axis=axis), np.percentile(values, 100.0 - tail, axis=axis))


@dataclass
class BootstrapCurves:
    """Point curve, per-sample curves and percentile bands.

    ``classifier_scores`` holds the classifier's score on each sample when a
    prediction set was supplied (index 0 is the full data).
    """

    point: PowerCurve
    samples: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    classifier_scores: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def curves(self) -> list[PowerCurve]:
        ks = self.point.k_values
        return [PowerCurve(ks, tuple(row)) for row in self.samples]

    def sample_curve(self, b: int) -> PowerCurve:
        return PowerCurve(self.point.k_values, tuple(self.samples[b]))


def classifier_scores(predictions: PredictionSet, W: RatingMatrix, scorer: Scorer, weights: np.ndarray,
                      rng=None, ref_r: int = 1, cap: int = SUBSET_CAP) -> np.ndarray:
    """Classifier score under each row of item weights; ref_r > 1 scores against pluralities."""
    _check_kind(scorer, predictions)
    predictions.check_covers(W)
    rng = as_source(rng)
    table, keys = prediction_table(predictions, W.items)
    if ref_r == 1:
        refs = W.codes.T
    else:
        plan = rater_subsets(W.max_raters, ref_r, rng.generator("hscore_r", ref_r), cap=cap)
        refs = reference_labels(W, plan.subsets, rng)
    scores = _per_sample_score(scorer, table[None], keys, refs, len(W.label_space), weights)
    if np.isnan(scores).any():
        raise DegenerateLabels(f"{scorer.name}: classifier score undefined on a bootstrap sample")
    return scores


def bootstrap_power_curves(W: RatingMatrix, combiner: Combiner, scorer: Scorer, n_samples: int = 500,
                           rng=None, resample: bool = True, ref_r: int = 1, cap: int = SUBSET_CAP,
                           jobs: int = 1, predictions: PredictionSet | None = None,
                           abc_cache: AbcCache | None = None) -> BootstrapCurves:
    """Power curves on ``n_samples`` item-resampled matrices plus the full-data curve."""
    if n_samples < 1:
        raise ValidationError("n_samples must be at least 1")
    W = _canonical(W)
    _check_inputs(W, combiner, scorer, ref_r)
    rng = as_source(rng)
    weights = bootstrap_weights(W.n_items, n_samples, rng, resample)
    means, coverage, _ = _run(W, combiner, scorer, rng, weights, ref_r, cap, jobs, abc_cache)
    meta = _metadata(combiner, scorer, n_samples, rng.seed, ref_r, cap, coverage)
    low, high = percentile_band(means[1:])
    h = None
    if predictions is not None:
        h = classifier_scores(predictions, W, scorer, weights, rng, ref_r, cap)
    point = PowerCurve(tuple(range(means.shape[1])), tuple(means[0]), tuple(low), tuple(high),
                       None if h is None else float(h[0]), meta)
    return BootstrapCurves(point, means[1:], low, high, h, meta)
