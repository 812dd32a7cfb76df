"""Property tests for the stated invariants, driven by hypothesis."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

import oracles
from survey_equivalence.combiners import (AbcCache, abc_combine, label_seq_prob, make_combiner,
                                          probability_one_item)
from survey_equivalence.core import (LabelSpace, PowerCurve, PredictionSet, Sentinel, Soft,
                                     ValidationError, validate_matrix)
from survey_equivalence.equivalence import seq
from survey_equivalence.power_curve import spc
from survey_equivalence.scorers import (AUC, F1, Agreement, CrossEntropy, DMI, cross_entropy_score,
                                        dmi_score, hscore, hscore_r)
from survey_equivalence.synthetic import analytic_survey_mi, running_example_model, state_label_mi, SyntheticModel

SPACES = [LabelSpace(("C", "D")), LabelSpace(("a", "b", "c"))]
FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def matrices(draw, max_items=8, max_raters=5, ragged=True, min_items=2):
    space = draw(st.sampled_from(SPACES))
    n = draw(st.integers(min_items, max_items))
    K = draw(st.integers(2, max_raters))
    rows = {}
    for i in range(n):
        m = draw(st.integers(2, K)) if ragged else K
        rows[f"i{i:02d}"] = draw(st.lists(st.sampled_from(space.labels), min_size=m, max_size=m))
    return validate_matrix(rows, space)


@st.composite
def pairs(draw, soft=False, min_size=2):
    L = draw(st.integers(2, 3))
    n = draw(st.integers(min_size, 12))
    labels = draw(st.lists(st.integers(0, L - 1), min_size=n, max_size=n))
    if soft:
        raw = draw(st.lists(st.lists(st.integers(1, 20), min_size=L, max_size=L), min_size=n, max_size=n))
        preds = np.array([[v / sum(r) for v in r] for r in raw])
    else:
        preds = np.array(draw(st.lists(st.integers(0, L - 1), min_size=n, max_size=n)))
    return preds, np.array(labels), L


@FAST
@given(matrices())
def test_round_trip(W):
    assert validate_matrix(W.to_dict(), W.label_space) == W


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=4), st.floats(2e-9, 0.1))
def test_soft_rejects_unnormalized(raw, off):
    probs = [v / sum(raw) for v in raw]
    Soft(tuple(probs))
    with pytest.raises(ValidationError):
        Soft(tuple([probs[0] + off, *probs[1:]]))


@pytest.mark.filterwarnings("ignore::survey_equivalence.scorers.DegenerateScoreWarning")
@FAST
@given(pairs(), st.randoms(use_true_random=False))
def test_hard_scorers_permutation_invariant(data, rnd):
    preds, labels, L = data
    order = list(range(len(labels)))
    rnd.shuffle(order)
    for scorer in (Agreement(), F1(0)):
        a = scorer(preds, labels, L)
        b = scorer(preds[order], labels[order], L)
        assert a == pytest.approx(b, abs=1e-12) or (math.isnan(a) and math.isnan(b))


@FAST
@given(pairs(soft=True), st.randoms(use_true_random=False))
def test_soft_scorers_permutation_invariant(data, rnd):
    preds, labels, L = data
    order = list(range(len(labels)))
    rnd.shuffle(order)
    assume(len(set(labels.tolist())) > 1)
    for scorer in (CrossEntropy(), AUC(0)):
        a, b = scorer(preds, labels, L), scorer(preds[order], labels[order], L)
        assert a == pytest.approx(b, abs=1e-12, nan_ok=True)


@FAST
@given(st.lists(st.integers(0, 1), min_size=3, max_size=15))
def test_cross_entropy_maximized_by_empirical_frequency(labels):
    labels = np.array(labels)
    f = labels.mean()
    assume(0 < f < 1)
    best = cross_entropy_score(np.tile([1 - f, f], (len(labels), 1)), labels)
    for p in np.linspace(0.01, 0.99, 99):
        assert cross_entropy_score(np.tile([1 - p, p], (len(labels), 1)), labels) <= best + 1e-12


@FAST
@given(pairs(), st.permutations([0, 1, 2]))
def test_dmi_invariant_under_label_relabeling(data, perm):
    preds, labels, L = data
    perm = [p for p in perm if p < L]
    relabel = np.array(perm)
    assert dmi_score(relabel[preds], relabel[labels], L) == pytest.approx(dmi_score(preds, labels, L), abs=1e-12)
    assert dmi_score(preds, labels, L) == pytest.approx(oracles.dmi(preds.tolist(), labels.tolist(), L), abs=1e-12)


@FAST
@given(matrices(ragged=False), st.data())
def test_hscore_r1_equals_hscore(W, data):
    labels = data.draw(st.lists(st.sampled_from(W.label_space.labels), min_size=W.n_items, max_size=W.n_items))
    preds = PredictionSet.from_hard(dict(zip(W.items, labels)), W.label_space)
    for scorer in (Agreement(), DMI()):
        assert hscore_r(preds, W, scorer, 1, rng=0) == hscore(preds, W, scorer)


@FAST
@given(matrices(ragged=False), st.data())
def test_hscore_is_mean_of_slots(W, data):
    labels = data.draw(st.lists(st.sampled_from(W.label_space.labels), min_size=W.n_items, max_size=W.n_items))
    preds = PredictionSet.from_hard(dict(zip(W.items, labels)), W.label_space)
    per_slot = [np.mean([p == row[j] for p, row in zip(labels, W.rows)]) for j in range(W.max_raters)]
    assert hscore(preds, W, Agreement()) == pytest.approx(np.mean(per_slot), abs=1e-12)


@FAST
@given(st.lists(st.integers(0, 3), min_size=2, max_size=3), st.data())
def test_probability_one_item_matches_enumeration(item, data):
    L = len(item)
    row = [lab for lab, c in enumerate(item) for _ in range(c)]
    assume(len(row) <= 6)
    seq_counts = data.draw(st.lists(st.integers(0, 3), min_size=L, max_size=L))
    assume(sum(seq_counts) <= len(row))
    expected = oracles.ordered_draw_probability(dict(enumerate(seq_counts)), row)
    assert probability_one_item(seq_counts, item) == pytest.approx(float(expected), abs=1e-12)


@FAST
@given(matrices(max_items=6, max_raters=4, min_items=3), st.integers(1, 3), st.data())
def test_sequence_probabilities_sum_to_one(W, k, data):
    excluded = data.draw(st.sampled_from(W.items))
    eligible = [i for i, n in zip(W.items, W.lengths) if n >= k and i != excluded]
    assume(eligible)
    cache = AbcCache(W)
    total = sum(label_seq_prob(list(s), W, excluded, cache)
                for s in itertools.product(W.label_space.labels, repeat=k))
    assert total == pytest.approx(1.0, abs=1e-9)


def _abc_or_none(seq_, W, item, cache):
    try:
        return abc_combine(seq_, W, item, cache).probs
    except ValueError as exc:
        return type(exc).__name__


@FAST
@given(matrices(max_items=6, max_raters=5, min_items=3), st.data())
def test_abc_anonymity_and_cache_transparency(W, data):
    item = data.draw(st.sampled_from(W.items))
    k = data.draw(st.integers(1, 3))
    s = data.draw(st.lists(st.sampled_from(W.label_space.labels), min_size=k, max_size=k))
    shuffled = data.draw(st.permutations(s))
    cached = AbcCache(W)
    base = _abc_or_none(s, W, item, cached)
    assert _abc_or_none(shuffled, W, item, cached) == base
    assert _abc_or_none(s, W, item, AbcCache(W, enabled=False)) == base


@FAST
@given(st.lists(st.floats(0.001, 1.0), min_size=3, max_size=8))
def test_seq_exact_at_knots(steps):
    means = tuple(np.cumsum([-1.0, *steps]))
    curve = PowerCurve(tuple(range(len(means))), means)
    for k in range(1, len(means)):
        assert seq(means[k], curve).value == k


@FAST
@given(st.lists(st.floats(0.001, 1.0), min_size=2, max_size=6), st.lists(st.floats(-2, 5), min_size=2, max_size=6))
def test_seq_monotone_in_score(steps, scores):
    means = tuple(np.cumsum([0.0, *steps]))
    curve = PowerCurve(tuple(range(len(means))), means)

    def rank(v):
        if v is Sentinel.LESS_THAN_ZERO:
            return -math.inf
        return math.inf if v is Sentinel.MORE_THAN_K else v

    values = [rank(seq(h, curve).value) for h in sorted(scores)]
    assert values == sorted(values)


@FAST
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6), st.floats(-3, 3), st.floats(0.001, 0.999))
def test_seq_shift_invariant(steps, shift, where):
    means = np.cumsum([0.0, *steps])
    h = means[0] + where * (means[-1] - means[0])
    base = seq(h, PowerCurve(tuple(range(len(means))), tuple(means))).value
    moved = seq(h + shift, PowerCurve(tuple(range(len(means))), tuple(means + shift))).value
    assert moved == pytest.approx(base, abs=1e-6)


@st.composite
def models(draw):
    a = draw(st.floats(0.05, 0.95))
    b = draw(st.floats(0.05, 0.95))
    prior = draw(st.floats(0.1, 0.9))
    return SyntheticModel(LabelSpace(("C", "D")), ((a, 1 - a), (b, 1 - b)), (prior, 1 - prior),
                          ((0.8, 0.2), (0.2, 0.8)), ((0.77, 0.23), (0.32, 0.68)))


@FAST
@given(models())
def test_survey_mi_monotone_and_bounded(model):
    mi = [analytic_survey_mi(model, k) for k in range(6)]
    bound = state_label_mi(model)
    assert mi[0] == pytest.approx(0.0, abs=1e-12)
    assert all(b >= a - 1e-12 for a, b in zip(mi, mi[1:]))
    assert mi[-1] <= bound + 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_shuffling_items_leaves_curve_unchanged(seed):
    from survey_equivalence.synthetic import generate
    W, *_ = generate(running_example_model(), 12, 4, seed)
    rev = validate_matrix(list(reversed(list(zip(W.items, W.rows)))), W.label_space)
    for name, scorer in (("majority", Agreement()), ("frequency", CrossEntropy())):
        a = spc(W, make_combiner(name), scorer, 5)
        b = spc(rev, make_combiner(name), scorer, 5)
        assert a.means == b.means


@FAST
@given(st.integers(0, 2**32), st.lists(st.text(min_size=1, max_size=5), min_size=1, max_size=10, unique=True))
def test_random_source_reproducible(seed, ids):
    from survey_equivalence.power_curve import bootstrap_weights, rater_subsets
    from survey_equivalence.streams import RandomSource, item_keys
    a, b = RandomSource(seed), RandomSource(seed)
    assert np.array_equal(a.uniforms(item_keys(ids), "tiebreak", (0, 2)),
                          b.uniforms(item_keys(ids), "tiebreak", (0, 2)))
    assert rater_subsets(12, 5, a) == rater_subsets(12, 5, b)
    assert np.array_equal(bootstrap_weights(len(ids), 3, a), bootstrap_weights(len(ids), 3, b))
