"""Survey power curves and survey equivalence for classifiers evaluated
against noisy human labels."""

from .combiners import (AbcCache, abc_combine, frequency, label_seq_prob, majority_vote,
                        make_combiner, plurality, probability_one_item)
from .core import (EquivalenceResult, Hard, LabelSpace, PowerCurve, PredictionSet, RatingMatrix,
                   Sentinel, Soft, ValidationError, validate_matrix)
from .equivalence import cross_group_equivalence, seq, seq_with_bootstrap
from .power_curve import bootstrap_power_curves, rater_subsets, spc
from .scorers import (agreement_score, auc_score, cross_entropy_score, dmi_score, f1_score, hscore,
                      hscore_r, krippendorff_alpha, make_scorer)
from .streams import RandomSource

__version__ = "0.1.0"

__all__ = [
    "AbcCache", "EquivalenceResult", "Hard", "LabelSpace", "PowerCurve", "PredictionSet",
    "RandomSource", "RatingMatrix", "Sentinel", "Soft", "ValidationError", "abc_combine",
    "agreement_score", "auc_score", "bootstrap_power_curves", "cross_entropy_score",
    "cross_group_equivalence", "dmi_score", "f1_score", "frequency", "hscore", "hscore_r",
    "krippendorff_alpha", "label_seq_prob", "majority_vote", "make_combiner", "make_scorer",
    "plurality", "probability_one_item", "rater_subsets", "seq", "seq_with_bootstrap", "spc",
    "validate_matrix",
]
