import warnings

import numpy as np
import pytest

import oracles
from survey_equivalence.core import Hard, LabelSpace, PredictionSet, Soft, validate_matrix
from survey_equivalence.scorers import (AUC, DMI, F1, Agreement, CrossEntropy, DegenerateLabels,
                                        DegenerateScoreWarning, EmptyInput, InsufficientRaters,
                                        ZeroProbabilityLabel, agreement_score, auc_score,
                                        cross_entropy_score, dmi_score, f1_score, hscore, hscore_r,
                                        krippendorff_alpha, make_scorer, score_pairs)

C, D = 0, 1

# Last-rater pairs of the stylized ten-item example, as implied by its worked
# arithmetic: the classifier misses only the first item; eight labels are C.
LAST_RATER_HARD = [(D, C)] + [(C, C)] * 7 + [(D, D)] * 2
SOFT_OF = {C: (0.77, 0.23), D: (0.32, 0.68)}


def test_agreement_basic():
    assert agreement_score([C, D], [C, C]) == 0.5
    assert agreement_score([C, D, D], [C, D, D]) == 1.0
    with pytest.raises(EmptyInput):
        agreement_score([], [])


def test_agreement_last_rater():
    p, y = zip(*LAST_RATER_HARD)
    assert agreement_score(p, y) == pytest.approx(0.9)


def test_cross_entropy_last_rater():
    p, y = zip(*LAST_RATER_HARD)
    probs = [SOFT_OF[o] for o in p]
    value = cross_entropy_score(probs, y)
    assert value == pytest.approx(-0.54, abs=0.005)
    assert value == pytest.approx(oracles.cross_entropy(probs, y), abs=1e-12)


def test_cross_entropy_constant_baseline():
    y = [C] * 8 + [D] * 2
    assert cross_entropy_score([(0.63, 0.37)] * 10, y) == pytest.approx(-0.82, abs=0.005)
    assert cross_entropy_score([(0.5, 0.5)] * 10, y) == -1.0


def test_cross_entropy_rejects_zero_probability():
    with pytest.raises(ZeroProbabilityLabel):
        cross_entropy_score([(1.0, 0.0)], [D])
    with pytest.raises(ZeroProbabilityLabel):
        CrossEntropy()(np.array([[1.0, 0.0]]), [D], 2)


def test_f1():
    assert f1_score([C, C, D], [C, D, C], positive=C) == 0.5
    assert f1_score([C, D], [C, D], positive=C) == 1.0
    assert f1_score([D, D], [C, D], positive=C) == 0.0
    with pytest.warns(DegenerateScoreWarning):
        assert f1_score([D, D], [D, D], positive=C) == 0.0


def test_auc():
    probs = np.array([[0.9, 0.1], [0.4, 0.6], [0.6, 0.4], [0.1, 0.9]])
    y = [C, C, D, D]
    assert auc_score(probs, y, C) == 0.75
    assert auc_score(probs, y, C) == oracles.auc([0.9, 0.4], [0.6, 0.1])
    assert auc_score(np.full((4, 2), 0.5), y, C) == 0.5
    assert auc_score(np.array([[0.9, 0.1], [0.2, 0.8]]), [C, D], C) == 1.0
    with pytest.raises(DegenerateLabels):
        auc_score(probs, [C] * 4, C)


def test_dmi():
    assert dmi_score([C, D], [C, D], 2) == pytest.approx(0.25)
    assert dmi_score([C, D], [D, C], 2) == pytest.approx(0.25)
    # independent: joint = outer product of marginals
    assert dmi_score([C, C, D, D], [C, D, C, D], 2) == pytest.approx(0.0, abs=1e-15)


def test_dmi_soft_matches_oracle():
    rng = np.random.default_rng(3)
    probs = rng.dirichlet([1, 1, 1], size=30)
    y = rng.integers(0, 3, size=30)
    assert dmi_score(probs, y, 3) == pytest.approx(oracles.dmi(probs.tolist(), y.tolist(), 3), abs=1e-12)


@pytest.mark.parametrize("scorer, kind", [
    (Agreement(), "hard"), (F1(0), "hard"), (DMI(), "hard"),
    (CrossEntropy(), "soft"), (AUC(0), "soft"), (DMI(), "soft"),
])
def test_grouped_path_matches_direct(scorer, kind):
    rng = np.random.default_rng(11)
    y = rng.integers(0, 2, size=40)
    w = rng.integers(0, 3, size=40).astype(float)
    if kind == "hard":
        p = rng.integers(0, 2, size=40)
        direct = {"agreement": lambda: agreement_score(p, y, w), "f1": lambda: f1_score(p, y, 0, w),
                  "dmi": lambda: dmi_score(p, y, 2, w)}[scorer.name]()
    else:
        a = rng.choice([0.2, 0.5, 0.7], size=40)
        p = np.column_stack([a, 1 - a])
        direct = {"cross-entropy": lambda: cross_entropy_score(p, y, w),
                  "auc": lambda: auc_score(p, y, 0, w), "dmi": lambda: dmi_score(p, y, 2, w)}[scorer.name]()
    assert scorer(p, y, 2, w) == pytest.approx(direct, abs=1e-12)


def test_make_scorer():
    assert make_scorer("ce").name == "cross-entropy"
    with pytest.raises(ValueError):
        make_scorer("f1")
    with pytest.raises(ValueError):
        make_scorer("spearman")


def test_score_pairs(binary):
    pairs = [(Hard("C"), "C"), (Hard("D"), "C"), (Hard("C"), "C")]
    assert score_pairs(Agreement(), pairs, binary) == pytest.approx(2 / 3)
    soft = [(Soft((0.5, 0.5)), "C"), (Soft((0.5, 0.5)), "D")]
    assert score_pairs(CrossEntropy(), soft, binary) == -1.0


def test_hscore_hand_example(binary, tiny_matrix):
    preds = PredictionSet.from_hard({"i1": "C", "i2": "C"}, binary)
    assert hscore(preds, tiny_matrix, Agreement()) == 0.75


def test_hscore_single_column(binary):
    W = validate_matrix({"a": ["C", "D"], "b": ["D", "D"], "c": ["C", "C"]}, binary)
    preds = PredictionSet.from_hard({"a": "C", "b": "C", "c": "C"}, binary)
    per_slot = [agreement_score([0, 0, 0], W.codes[:, j]) for j in range(2)]
    assert hscore(preds, W, Agreement()) == pytest.approx(np.mean(per_slot))


def test_hscore_unanimous(binary):
    W = validate_matrix({"a": ["C", "C", "C"], "b": ["D", "D", "D"]}, binary)
    preds = PredictionSet.from_hard({"a": "C", "b": "D"}, binary)
    assert hscore(preds, W, Agreement()) == 1.0
    assert hscore_r(preds, W, Agreement(), 3, rng=1) == 1.0


def test_hscore_ragged_restricts_slots(binary):
    W = validate_matrix({"a": ["C", "D", "D"], "b": ["C", "C"]}, binary)
    preds = PredictionSet.from_hard({"a": "C", "b": "C"}, binary)
    # slots: [C, C] -> 1, [D, C] -> .5, [D] -> 0
    assert hscore(preds, W, Agreement()) == pytest.approx(0.5)


def test_hscore_r_one_equals_hscore(binary, running_1000):
    W, hard, _, _ = running_1000
    assert hscore_r(hard, W, Agreement(), 1, rng=5) == hscore(hard, W, Agreement())


def test_hscore_r_needs_raters(binary):
    W = validate_matrix({"a": ["C", "D", "D"], "b": ["C", "C"]}, binary)
    preds = PredictionSet.from_hard({"a": "C", "b": "C"}, binary)
    with pytest.raises(InsufficientRaters) as exc:
        hscore_r(preds, W, Agreement(), 3)
    assert exc.value.item == "b"


def test_hscore_kind_mismatch(binary, tiny_matrix):
    preds = PredictionSet.from_soft({"i1": (0.5, 0.5), "i2": (0.5, 0.5)}, binary)
    with pytest.raises(ValueError):
        hscore(preds, tiny_matrix, Agreement())


def test_alpha_matches_oracle():
    rng = np.random.default_rng(4)
    labels = LabelSpace(("a", "b", "c"))
    rows = {f"i{i}": list(rng.choice(labels.labels, size=rng.integers(2, 6))) for i in range(25)}
    W = validate_matrix(rows, labels)
    assert krippendorff_alpha(W) == pytest.approx(oracles.krippendorff_alpha(list(rows.values())), abs=1e-12)


def test_alpha_extremes(binary):
    W = validate_matrix({"a": ["C", "C", "C"], "b": ["D", "D"]}, binary)
    assert krippendorff_alpha(W) == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    noise = validate_matrix({f"i{i}": list(rng.choice(["C", "D"], 10)) for i in range(1000)}, binary)
    assert abs(krippendorff_alpha(noise)) < 0.02
    with pytest.warns(DegenerateScoreWarning):
        assert krippendorff_alpha(validate_matrix({"a": ["C", "C"]}, binary)) == 1.0


def test_alpha_running_example(running_1000):
    assert krippendorff_alpha(running_1000[0]) == pytest.approx(0.33, abs=0.03)


def test_no_warning_on_normal_f1():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        f1_score([C, D], [C, C], positive=C)
