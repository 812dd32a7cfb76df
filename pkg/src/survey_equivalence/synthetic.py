"""Urn-of-urns generative model, exact information-theoretic oracles, and
ground-truth scoring for uniform-noise experiments.

An item's state is a distribution over labels; raters draw labels i.i.d.
from it. A classifier sees the state only through a noisy hard emission,
optionally mapped to a fixed probability vector per emitted label.
"""

from __future__ import annotations

import itertools
import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace

import numpy as np

from .core import LabelSpace, PredictionSet, RatingMatrix, ValidationError
from .scorers import Scorer
from .streams import RandomSource

TOL = 1e-9


class NonUniformNoiseModel(ValidationError):
    pass


class UncalibratedClassifier(UserWarning):
    pass


def _entropy(p) -> float:
    p = np.asarray(p, dtype=np.float64)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _distribution(values, what: str, full_support: bool = False) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if any(v < 0 for v in values) or abs(math.fsum(values) - 1.0) > TOL:
        raise ValidationError(f"{what} must be a probability vector: {values}")
    if full_support and any(v == 0 for v in values):
        raise ValidationError(f"{what} needs full support over the labels: {values}")
    return values


@dataclass(frozen=True)
class SyntheticModel:
    """States with priors, plus per-state hard emission and a per-label soft map."""

    label_space: LabelSpace
    states: tuple[tuple[float, ...], ...]
    priors: tuple[float, ...]
    hard_emission: tuple[tuple[float, ...], ...]
    soft_map: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        L = len(self.label_space)
        if len(self.states) < 2:
            raise ValidationError("a synthetic model needs at least 2 states")
        if not (len(self.priors) == len(self.states) == len(self.hard_emission)):
            raise ValidationError("states, priors and hard emissions must align")
        if len(self.soft_map) != L:
            raise ValidationError("soft map needs one probability vector per label")
        object.__setattr__(self, "priors", _distribution(self.priors, "priors"))
        object.__setattr__(self, "states", tuple(_distribution(s, "state", True) for s in self.states))
        object.__setattr__(self, "hard_emission",
                           tuple(_distribution(e, "hard emission") for e in self.hard_emission))
        object.__setattr__(self, "soft_map", tuple(_distribution(m, "soft map row") for m in self.soft_map))
        for vec in (*self.states, *self.hard_emission, *self.soft_map):
            if len(vec) != L:
                raise ValidationError(f"vector {vec} does not match {L} labels")

    @property
    def n_labels(self) -> int:
        return len(self.label_space)

    def label_marginal(self) -> np.ndarray:
        return np.asarray(self.priors) @ np.asarray(self.states)

    def output_label_joint(self) -> np.ndarray:
        """Pr[classifier emits o, a random rater says l] as an (|L|, |L|) array."""
        pi = np.asarray(self.priors)[:, None, None]
        return (pi * np.asarray(self.hard_emission)[:, :, None] * np.asarray(self.states)[:, None, :]).sum(0)

    def calibrated(self) -> SyntheticModel:
        """Same model with the soft map set to Pr[label | hard emission]."""
        joint = self.output_label_joint()
        p_out = joint.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(p_out > 0, joint / np.where(p_out > 0, p_out, 1.0), 1.0 / self.n_labels)
        return replace(self, soft_map=tuple(tuple(float(v) for v in row) for row in cond))

    def is_calibrated(self, tol: float = TOL) -> bool:
        joint = self.output_label_joint()
        used = joint.sum(axis=1) > 0
        return bool(np.allclose(np.asarray(self.calibrated().soft_map)[used],
                                np.asarray(self.soft_map)[used], rtol=0, atol=tol))


def running_example_model() -> SyntheticModel:
    return SyntheticModel(
        label_space=LabelSpace(("C", "D")),
        states=((0.8, 0.2), (0.5, 0.5), (0.1, 0.9)),
        priors=(0.7, 0.1, 0.2),
        hard_emission=((0.9, 0.1), (0.5, 0.5), (0.05, 0.95)),
        soft_map=((0.77, 0.23), (0.32, 0.68)),
    )


def model_from_config(config: Mapping) -> SyntheticModel:
    """Build a model from ``{labels, states: [{probs, prior}], classifier: {hard_emission, soft_map}}``.

    ``soft_map`` may be a list in label order or a mapping keyed by label;
    when omitted the calibrated map is used.
    """
    try:
        labels = LabelSpace(tuple(config["labels"]))
        states = [tuple(s["probs"]) for s in config["states"]]
        priors = [s["prior"] for s in config["states"]]
        clf = config.get("classifier", {})
        emission = clf.get("hard_emission")
        if emission is None:
            emission = [tuple(s) for s in states]
        soft = clf.get("soft_map")
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed model config: missing or invalid {exc}") from None
    if isinstance(soft, Mapping):
        soft = [soft[lab] for lab in labels]
    placeholder = soft is None
    model = SyntheticModel(labels, tuple(states), tuple(priors), tuple(tuple(e) for e in emission),
                           tuple(tuple(m) for m in soft) if soft else
                           tuple(tuple(1.0 / len(labels) for _ in labels) for _ in labels))
    return model.calibrated() if placeholder else model


def model_to_config(model: SyntheticModel) -> dict:
    return {
        "labels": list(model.label_space.labels),
        "states": [{"probs": list(s), "prior": p} for s, p in zip(model.states, model.priors)],
        "classifier": {"hard_emission": [list(e) for e in model.hard_emission],
                       "soft_map": [list(m) for m in model.soft_map]},
    }


@dataclass(frozen=True)
class GroundTruthTrace:
    items: tuple[str, ...]
    states: tuple[int, ...]

    def __post_init__(self):
        if len(self.items) != len(self.states):
            raise ValidationError("trace needs one state per item")

    def __len__(self):
        return len(self.states)


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomSource):
        return rng.generator("synthetic")
    return RandomSource(0 if rng is None else int(rng)).generator("synthetic")


def item_ids(n_items: int) -> tuple[str, ...]:
    width = len(str(max(n_items - 1, 0)))
    return tuple(f"i{i:0{width}d}" for i in range(n_items))


def sample_states(model: SyntheticModel, n_items: int, rng=None) -> np.ndarray:
    return _gen_states(model, n_items, _generator(rng))


def _gen_states(model, n_items, gen):
    cdf = np.cumsum(model.priors)
    return np.minimum(np.searchsorted(cdf, gen.random(n_items), side="right"), len(cdf) - 1)


def sample_labels(model: SyntheticModel, states: Sequence[int], n_raters: int, rng=None) -> np.ndarray:
    """(n_items, n_raters) label codes drawn i.i.d. from each item's state."""
    return _gen_labels(model, np.asarray(states), n_raters, _generator(rng))


def _gen_labels(model, states, n_raters, gen):
    cdf = np.cumsum(np.asarray(model.states), axis=1)[states]
    u = gen.random((len(states), n_raters))
    codes = (u[:, :, None] >= cdf[:, None, :]).sum(-1)
    return np.minimum(codes, model.n_labels - 1)


def matrix_from_codes(codes: np.ndarray, label_space: LabelSpace, items=None) -> RatingMatrix:
    items = item_ids(len(codes)) if items is None else tuple(items)
    labels = np.asarray(label_space.labels, dtype=object)[codes]
    return RatingMatrix(items, tuple(tuple(row) for row in labels), label_space)


def generate(model: SyntheticModel, n_items: int, n_raters: int, rng=None, states=None):
    """Draw a rating matrix, hard and soft classifier outputs, and the state trace."""
    if n_items < 1 or n_raters < 2:
        raise ValidationError("need at least 1 item and 2 raters")
    gen = _generator(rng)
    states = _gen_states(model, n_items, gen) if states is None else np.asarray(states)
    codes = _gen_labels(model, states, n_raters, gen)
    e_cdf = np.cumsum(np.asarray(model.hard_emission), axis=1)[states]
    hard = np.minimum((gen.random(n_items)[:, None] >= e_cdf).sum(-1), model.n_labels - 1)
    items = item_ids(n_items)
    labels = model.label_space.labels
    W = matrix_from_codes(codes, model.label_space, items)
    hard_set = PredictionSet.from_hard({i: labels[o] for i, o in zip(items, hard)}, model.label_space)
    soft_set = PredictionSet.from_soft({i: model.soft_map[o] for i, o in zip(items, hard)},
                                       model.label_space)
    return W, hard_set, soft_set, GroundTruthTrace(items, tuple(int(s) for s in states))


def _count_vectors(k: int, L: int):
    for cut in itertools.combinations(range(k + L - 1), L - 1):
        bounds = (-1, *cut, k + L - 1)
        yield tuple(bounds[i + 1] - bounds[i] - 1 for i in range(L))


def _multinomial(counts) -> int:
    out, total = 1, 0
    for c in counts:
        total += c
        out *= math.comb(total, c)
    return out


def analytic_survey_mi(model: SyntheticModel, k: int) -> float:
    """Exact MI in bits between one fresh label and k labels of the same item."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    S = np.asarray(model.states)
    pi = np.asarray(model.priors)
    cond_entropy = 0.0
    for y in _count_vectors(k, model.n_labels):
        # per state probability of one ordered sequence with these counts
        seq_p = pi * np.prod(S ** np.asarray(y), axis=1)
        p_y = seq_p.sum()
        if p_y == 0:
            continue
        nxt = (seq_p @ S) / p_y
        cond_entropy += _multinomial(y) * p_y * _entropy(nxt)
    return _entropy(model.label_marginal()) - cond_entropy


def state_label_mi(model: SyntheticModel) -> float:
    """MI(state; label): the large-survey limit of the survey MI."""
    return _entropy(model.label_marginal()) - float(
        sum(p * _entropy(s) for p, s in zip(model.priors, model.states)))


def analytic_classifier_mi(model: SyntheticModel, soft: bool = True) -> float:
    """Exact MI in bits between the classifier's output and a random label.

    With ``soft=True`` the output is the soft-map vector, so hard emissions
    mapped to the same vector are merged. Warns with
    :class:`UncalibratedClassifier` when the soft map is not the calibrated one.
    """
    joint = model.output_label_joint()
    if soft:
        if not model.is_calibrated():
            warnings.warn("soft map differs from Pr[label | output]; the cross-entropy gain will "
                          "not equal this mutual information", UncalibratedClassifier, stacklevel=2)
        groups: dict[tuple[float, ...], np.ndarray] = {}
        for row, vec in zip(joint, model.soft_map):
            groups[vec] = groups.get(vec, 0) + row
        joint = np.array(list(groups.values()))
    p_out = joint.sum(axis=1)
    p_lab = joint.sum(axis=0)
    return _entropy(p_out) + _entropy(p_lab) - _entropy(joint.ravel())


def expected_classifier_ce(model: SyntheticModel) -> float:
    """Expected base-2 log score of the soft classifier against one random label."""
    joint = model.output_label_joint()
    return float((joint * np.log2(np.asarray(model.soft_map))).sum())


def omniscient_ce(model: SyntheticModel) -> float:
    """Expected log score of predicting each item's true state."""
    return -float(sum(p * _entropy(s) for p, s in zip(model.priors, model.states)))


def state_labels(model: SyntheticModel) -> np.ndarray:
    """Label each state stands for, when states and labels are in one-to-one correspondence."""
    tops = np.argmax(np.asarray(model.states), axis=1)
    if len(model.states) != model.n_labels or len(set(tops.tolist())) != model.n_labels:
        raise NonUniformNoiseModel("ground-truth scoring needs exactly one state per label")
    return tops


def hscore_star(predictions: PredictionSet, trace: GroundTruthTrace, model: SyntheticModel,
                scorer: Scorer) -> float:
    """Score predictions against each item's true state (as its label)."""
    if not scorer.accepts(predictions.kind):
        raise ValidationError(f"scorer {scorer.name!r} does not accept {predictions.kind} predictions")
    truth = state_labels(model)[np.asarray(trace.states)]
    return scorer(predictions.as_array(trace.items), truth, model.n_labels)
