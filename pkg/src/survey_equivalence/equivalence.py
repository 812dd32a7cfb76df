"""Survey equivalence: where a classifier's score crosses the power curve."""

from __future__ import annotations

import numpy as np

from .combiners import Combiner
from .core import EquivalenceResult, PowerCurve, PredictionSet, RatingMatrix, Sentinel, ValidationError
from .power_curve import (SUBSET_CAP, SurveyContext, _canonical, _per_sample_score, _slot_counts,
                          bootstrap_power_curves, percentile_band, rater_subsets, spc)
from .scorers import Scorer
from .streams import as_source


class ItemMismatch(ValidationError):
    def __init__(self, only_a, only_b):
        self.only_a, self.only_b = sorted(only_a), sorted(only_b)
        super().__init__(f"groups cover different items: {len(self.only_a)} only in the first, "
                         f"{len(self.only_b)} only in the second")


def crossing(h_score: float, means) -> float | Sentinel:
    """Leftmost fractional k at which the curve reaches ``h_score``."""
    c = np.asarray(means, dtype=np.float64)
    if h_score <= c[0]:
        return Sentinel.LESS_THAN_ZERO
    above = np.flatnonzero(c >= h_score)
    if above.size == 0:
        return Sentinel.MORE_THAN_K
    k = int(above[0])
    return (k - 1) + float((h_score - c[k - 1]) / (c[k] - c[k - 1]))


def seq(h_score: float, curve: PowerCurve) -> EquivalenceResult:
    return EquivalenceResult(crossing(h_score, curve.means), h_score=float(h_score), curve=curve)


def seq_with_bootstrap(h: PredictionSet, W: RatingMatrix, combiner: Combiner, scorer: Scorer,
                       n_samples: int = 500, rng=None, ref_r: int = 1, cap: int = SUBSET_CAP,
                       jobs: int = 1, resample: bool = True) -> EquivalenceResult:
    """Point equivalence on the full data plus one value per item-bootstrap sample.

    The classifier is rescored on each sample's items, so it shares the
    curve's sampling noise. Sentinel outcomes are counted but left out of
    the percentile band.
    """
    boot = bootstrap_power_curves(W, combiner, scorer, n_samples, rng, resample=resample,
                                  ref_r=ref_r, cap=cap, jobs=jobs, predictions=h)
    return equivalence_from_bootstrap(boot)


def equivalence_from_bootstrap(boot) -> EquivalenceResult:
    """Equivalence for the full data and each sample of a bootstrap run with classifier scores."""
    if boot.classifier_scores is None:
        raise ValidationError("bootstrap run has no classifier scores")
    point = crossing(boot.classifier_scores[0], boot.point.means)
    values = tuple(crossing(s, row) for s, row in zip(boot.classifier_scores[1:], boot.samples))
    numeric = [v for v in values if not isinstance(v, Sentinel)]
    low = high = None
    if numeric:
        low, high = (float(x) for x in percentile_band(np.asarray(numeric)))
    return EquivalenceResult(point, values, low, high, float(boot.classifier_scores[0]), boot.point)


def classifier_band(boot, level: float = 95.0) -> tuple[float, float]:
    """Percentile band of the classifier's score over bootstrap samples."""
    low, high = percentile_band(boot.classifier_scores[1:], level=level)
    return float(low), float(high)


def cross_group_equivalence(group_a: RatingMatrix, group_b: RatingMatrix, combiner: Combiner,
                            scorer: Scorer, k_a: int, rng=None, cap: int = SUBSET_CAP,
                            jobs: int = 1) -> EquivalenceResult:
    """How many group-b raters a k_a-rater survey of group a is worth.

    Group a's combined k_a-subsets act as the classifier, scored against
    every group-b slot and averaged over the subset plan. When both groups
    are the same matrix, each subset is scored only against its unused
    slots, so the result is exactly k_a.
    """
    a_items, b_items = set(group_a.items), set(group_b.items)
    if a_items != b_items:
        raise ItemMismatch(a_items - b_items, b_items - a_items)
    if group_a.label_space != group_b.label_space:
        raise ValidationError("groups use different label spaces")
    if not 0 <= k_a <= group_a.max_raters:
        raise ValidationError(f"k_a must be within 0..{group_a.max_raters}")
    A, B = _canonical(group_a), _canonical(group_b)
    same = A == B
    rng = as_source(rng)
    curve = spc(B, combiner, scorer, rng, cap=cap, jobs=jobs)
    if same:
        if k_a >= len(curve):
            raise ValidationError("k_a must leave at least one reference slot")
        return seq(curve.means[k_a], curve)

    ctx = SurveyContext(A, combiner, scorer, rng, np.ones((1, A.n_items)), cap=cap)
    refs = B.codes.T
    scores = []
    for subset in rater_subsets(A.max_raters, k_a, rng.generator("subsets", k_a), cap).subsets:
        covered = A.lengths > max(subset) if subset else np.ones(A.n_items, dtype=bool)
        table, keys = combiner.predict(ctx, subset, _slot_counts(A, subset), covered)
        scores.append(_per_sample_score(scorer, table, keys, refs, len(A.label_space), ctx.weights)[0])
    return seq(float(np.nanmean(scores)), curve)
