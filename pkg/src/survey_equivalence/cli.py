"""Command-line entry point: ``survey-equivalence {curve,synth,alpha,calibrate}``.

Exit codes: 0 success, 1 invalid input or usage, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from importlib import resources

import numpy as np

from . import __version__
from .combiners import COMBINER_NAMES, CombinerError, make_combiner
from .core import Sentinel, ValidationError
from .equivalence import classifier_band, equivalence_from_bootstrap, seq
from .io import (SCHEMA_VERSION, calibrate_discrete, jsonable, load_predictions_csv, load_ratings_csv,
                 write_json, write_plot_csv, write_predictions_csv, write_ratings_csv)
from .power_curve import SUBSET_CAP, bootstrap_power_curves, classifier_scores, spc
from .scorers import SCORER_NAMES, ScoringError, krippendorff_alpha, make_scorer
from .streams import RandomSource
from .synthetic import generate, model_from_config, running_example_model

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _labels(text):
    return [s.strip() for s in text.split(",") if s.strip()] if text else None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="survey-equivalence",
                description="Survey power curves and survey equivalence for classifiers.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("curve", help="power curve and the classifier's survey equivalence")
    c.add_argument("--ratings", required=True, help="ratings CSV: item,r1,...,rK")
    c.add_argument("--predictions", required=True, help="classifier CSV: item,label or item,p_<label>,...")
    c.add_argument("--combiner", required=True, choices=COMBINER_NAMES)
    c.add_argument("--scorer", required=True, choices=SCORER_NAMES + ("ce",))
    c.add_argument("--bootstrap", type=int, default=500, help="bootstrap samples (0 disables)")
    c.add_argument("--subset-cap", type=int, default=SUBSET_CAP,
                   help="rater subsets sampled per survey size when there are more")
    c.add_argument("--seed", type=int, default=0, help="random seed; output is a function of it")
    c.add_argument("--positive-label", help="positive label for f1 and auc")
    c.add_argument("--ref-r", type=int, default=1,
                   help="score against the plurality of r reference raters")
    c.add_argument("--labels", help="comma-separated label order (default: sorted observed labels)")
    c.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="worker threads (results do not depend on it)")
    c.add_argument("--out", help="JSON result path (default: stdout)")
    c.add_argument("--plot", help="plot-point CSV path")

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="model config JSON")
    src.add_argument("--running-example", action="store_true")
    s.add_argument("--items", type=int, default=1000)
    s.add_argument("--raters", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--calibrated", action="store_true", help="write calibrated soft outputs")
    s.add_argument("--out-prefix", required=True)

    a = sub.add_parser("alpha", help="Krippendorff's alpha of a ratings file")
    a.add_argument("--ratings", required=True)
    a.add_argument("--labels")

    k = sub.add_parser("calibrate", help="map discrete classifier outputs to observed label rates")
    k.add_argument("--ratings", required=True)
    k.add_argument("--predictions", required=True)
    k.add_argument("--positive-label", required=True)
    k.add_argument("--labels")
    k.add_argument("--out", required=True)
    return p


def _equivalence_field(value):
    return value.value if isinstance(value, Sentinel) else float(value)


def run_curve(args) -> dict:
    if args.bootstrap < 0:
        raise UsageError("--bootstrap must be >= 0")
    if args.subset_cap < 1:
        raise UsageError("--subset-cap must be >= 1")
    if args.ref_r < 1:
        raise UsageError("--ref-r must be >= 1")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    started = time.perf_counter()
    W = load_ratings_csv(args.ratings, _labels(args.labels))
    predictions = load_predictions_csv(args.predictions, W.label_space)
    predictions.check_covers(W)
    positive = None
    if args.scorer in ("f1", "auc"):
        if args.positive_label is None:
            raise UsageError(f"--scorer {args.scorer} needs --positive-label")
        if args.positive_label not in W.label_space:
            raise UsageError(f"--positive-label {args.positive_label!r} is not one of {W.label_space.labels}")
        positive = W.label_space.index(args.positive_label)
    scorer = make_scorer(args.scorer, positive)
    combiner = make_combiner(args.combiner)
    if not scorer.accepts(predictions.kind):
        raise UsageError(f"--scorer {args.scorer} does not accept the {predictions.kind} predictions "
                         f"in --predictions")
    if not scorer.accepts(combiner.output_kind):
        raise UsageError(f"--scorer {args.scorer} cannot score {combiner.output_kind} output of "
                         f"--combiner {args.combiner}")
    rng = RandomSource(args.seed)
    opts = dict(ref_r=args.ref_r, cap=args.subset_cap, jobs=args.jobs)

    if args.bootstrap > 0:
        boot = bootstrap_power_curves(W, combiner, scorer, args.bootstrap, rng,
                                      predictions=predictions, **opts)
        result = equivalence_from_bootstrap(boot)
        clf_ci = list(classifier_band(boot))
    else:
        curve = spc(W, combiner, scorer, rng, **opts)
        h = classifier_scores(predictions, W, scorer, np.ones((1, W.n_items)), rng,
                              args.ref_r, args.subset_cap)[0]
        result = seq(float(h), curve)
        clf_ci = None
    curve = result.curve

    eq = {
        "point": _equivalence_field(result.value),
        "bootstrap_mean": result.bootstrap_mean,
        "ci": None if result.ci_low is None else [result.ci_low, result.ci_high],
        "sentinel_counts": result.sentinel_counts,
        "interpretation": result.interpretation(),
    }
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": {
            "ratings": args.ratings,
            "predictions": args.predictions,
            "combiner": args.combiner,
            "scorer": scorer.name,
            "bootstrap": args.bootstrap,
            "subset_cap": args.subset_cap,
            "seed": args.seed,
            "positive_label": args.positive_label,
            "ref_r": args.ref_r,
            "labels": list(W.label_space.labels),
        },
        "k_values": list(curve.k_values),
        "means": list(curve.means),
        "ci_low": None if curve.ci_low is None else list(curve.ci_low),
        "ci_high": None if curve.ci_high is None else list(curve.ci_high),
        "coverage": list(curve.metadata.get("coverage", [])),
        "classifier_score": result.h_score,
        "classifier_ci": clf_ci,
        "survey_equivalence": eq,
    }
    doc = jsonable(doc)
    doc["runtime_ms"] = int(round(1000 * (time.perf_counter() - started)))
    if args.plot:
        write_plot_csv(args.plot, curve, result.h_score)
    return doc


def _cmd_curve(args, out) -> int:
    doc = run_curve(args)
    if args.out:
        write_json(args.out, doc)
    else:
        out.write(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def _cmd_synth(args, out) -> int:
    if args.items < 1 or args.raters < 2:
        raise UsageError("--items must be >= 1 and --raters >= 2")
    if args.running_example:
        model = running_example_model()
    else:
        try:
            with open(args.model, encoding="utf-8") as fh:
                config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"--model {args.model}: invalid JSON ({exc})") from None
        model = model_from_config(config)
    if args.calibrated:
        model = model.calibrated()
    W, hard, soft, trace = generate(model, args.items, args.raters, RandomSource(args.seed))
    prefix = args.out_prefix
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)
    write_ratings_csv(prefix + "ratings.csv", W)
    write_predictions_csv(prefix + "hard.csv", hard, W.items)
    write_predictions_csv(prefix + "soft.csv", soft, W.items)
    with open(prefix + "states.csv", "w", encoding="utf-8") as fh:
        fh.write("item,state\n")
        fh.writelines(f"{i},{s}\n" for i, s in zip(trace.items, trace.states))
    out.write(f"wrote {prefix}ratings.csv, {prefix}hard.csv, {prefix}soft.csv, {prefix}states.csv\n")
    return EXIT_OK


def _cmd_alpha(args, out) -> int:
    W = load_ratings_csv(args.ratings, _labels(args.labels))
    out.write(f"{krippendorff_alpha(W):.6f}\n")
    return EXIT_OK


def _cmd_calibrate(args, out) -> int:
    W = load_ratings_csv(args.ratings, _labels(args.labels))
    if args.positive_label not in W.label_space:
        raise UsageError(f"--positive-label {args.positive_label!r} is not one of {W.label_space.labels}")
    predictions = load_predictions_csv(args.predictions, W.label_space)
    write_predictions_csv(args.out, calibrate_discrete(predictions, W, args.positive_label), W.items)
    return EXIT_OK


COMMANDS = {"curve": _cmd_curve, "synth": _cmd_synth, "alpha": _cmd_alpha, "calibrate": _cmd_calibrate}


def cli_main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args, out)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return EXIT_INVALID
    except (ValidationError, ScoringError, CombinerError, OSError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        err.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


def schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("schema/result-v1.json").read_text())


def main() -> None:
    sys.exit(cli_main())
