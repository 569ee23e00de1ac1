"""Experiment grid: the ablation conditions E1-E9 over a labeled corpus.

Each condition controls four things: how many true labels are available
(all, one entity per sentence, or only a small seed), which gazetteer
policy provides pins (none, exact C1, filtered C2, or "gold" partial
labels), whether model predictions and iterative refinement are used, and
the output mode (softmax-style marginal argmax vs CRF-style Viterbi after
a sequence-mode retrain).

Rows E1/E2 are the fully-supervised upper bound, E3/E4 the partial-label
baseline, E5/E6 iterative refinement with perfect-precision partial pins,
and E7/E8/E9 the realistic gazetteer pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bootstrap import BootstrapConfig, finalize, iterative_train
from .corpus import Dataset, TagSet, bio_decode, bio_encode, split_seed
from .errors import WeaknerError
from .metrics import EvalReport, evaluate_model
from .refset import (
    RefMatch,
    ReferenceSet,
    audit_matcher,
    exact_policy,
    filter_names,
    filtered_policy,
    find_matches,
)
from .tagger import Objective, TrainConfig, train


@dataclass(frozen=True)
class Condition:
    cid: str
    true_labels: str          # "100%" | "one_per_sentence" | "seed"
    ref_policy: str | None    # None | "gold" | "c1" | "c2"
    predicted: bool
    iterative: bool
    output: str               # "softmax" | "crf"


def default_conditions():
    return [
        Condition("E1", "100%", None, False, False, "softmax"),
        Condition("E2", "100%", None, False, False, "crf"),
        Condition("E3", "one_per_sentence", None, False, False, "softmax"),
        Condition("E4", "one_per_sentence", None, False, False, "crf"),
        Condition("E5", "seed", "gold", True, True, "softmax"),
        Condition("E6", "seed", "gold", True, True, "crf"),
        Condition("E7", "seed", "c1", True, True, "softmax"),
        Condition("E8", "seed", "c2", True, True, "softmax"),
        Condition("E9", "seed", "c2", True, True, "crf"),
    ]


@dataclass
class GridConfig:
    seed_fraction: float = 0.03
    test_fraction: float = 0.2
    iterations: int = 10
    seed_epochs: int = 12
    round_epochs: int = 3
    full_epochs: int = 6
    final_epochs: int = 6
    learning_rate: float = 0.25
    decay: float = 0.08
    l2: float = 1e-4
    min_name_length: int = 4
    rng_seed: int = 0

    def train_cfg(self, epochs: int, objective: Objective) -> TrainConfig:
        return TrainConfig(
            epochs=epochs,
            learning_rate=self.learning_rate,
            decay=self.decay,
            l2=self.l2,
            rng_seed=self.rng_seed,
            objective=objective,
        )


@dataclass
class GridRow:
    condition: Condition
    seed_report: EvalReport | None
    aug_report: EvalReport
    matcher_precision: float | None = None
    matcher_recall: float | None = None
    trace: object = None
    model: object = None


def mask_to_one_entity(gold_corpus: Dataset, tags: TagSet, rng_seed: int):
    """Keep exactly one randomly chosen gold entity per sentence, masking
    every other token to O. Returns (masked dataset, kept spans)."""
    rng = np.random.default_rng(rng_seed)
    labels, kept = [], []
    for s, hard in enumerate(gold_corpus.labels):
        spans = bio_decode(hard, tags, sentence=s)
        if spans:
            choice = spans[int(rng.integers(len(spans)))]
            kept.append(choice)
            labels.append(bio_encode([choice], len(hard), tags, sentence=s))
        else:
            labels.append([0] * len(hard))
    return Dataset(list(gold_corpus.sentences), labels, gold_corpus.kind), kept


def spans_as_pins(spans, sentences):
    """Turn gold entity spans into pin matches (name = mention text)."""
    return [
        RefMatch(
            sp.sentence,
            sp.first,
            sp.last,
            " ".join(t.text for t in sentences[sp.sentence].tokens[sp.first:sp.last + 1]),
            sp.entity_type,
        )
        for sp in spans
    ]


def _pins_for(cond, corpus, corpus_gold, tags, refset, dictionary, cfg):
    """(pins, matcher precision, matcher recall) for a seed-mode condition."""
    if cond.ref_policy == "gold":
        _, kept = mask_to_one_entity(corpus_gold, tags, cfg.rng_seed + 17)
        pins = spans_as_pins(kept, corpus_gold.sentences)
    elif cond.ref_policy == "c1":
        pins = find_matches(corpus, refset, exact_policy())
    elif cond.ref_policy == "c2":
        policy = filtered_policy(dictionary, cfg.min_name_length)
        pins = find_matches(corpus, filter_names(refset, policy), policy)
    elif cond.ref_policy is None:
        pins = []
    else:
        raise WeaknerError(f"unknown ref policy {cond.ref_policy!r}")
    if not pins:
        return pins, None, None
    p, r = audit_matcher(pins, corpus_gold, tags)
    return pins, p, r


def run_condition(
    cond: Condition,
    tags: TagSet,
    train_gold: Dataset,
    seed_ds: Dataset,
    corpus: Dataset,
    corpus_gold: Dataset,
    test: Dataset,
    refset: ReferenceSet,
    dictionary,
    cfg: GridConfig,
) -> GridRow:
    eval_mode = "soft" if cond.output == "softmax" else "hard"

    if cond.true_labels == "100%":
        objective = Objective.MARGINAL if cond.output == "softmax" else Objective.SEQUENCE
        model = train(train_gold, tags, cfg.train_cfg(cfg.full_epochs, objective))
        return GridRow(cond, None, evaluate_model(model, test, mode=eval_mode), model=model)

    if cond.true_labels == "one_per_sentence":
        masked, _ = mask_to_one_entity(corpus_gold, tags, cfg.rng_seed + 17)
        data = Dataset(
            list(seed_ds.sentences) + list(masked.sentences),
            list(seed_ds.labels) + list(masked.labels),
            seed_ds.kind,
        )
        objective = Objective.MARGINAL if cond.output == "softmax" else Objective.SEQUENCE
        model = train(data, tags, cfg.train_cfg(cfg.full_epochs, objective))
        return GridRow(cond, None, evaluate_model(model, test, mode=eval_mode), model=model)

    # seed mode: the bootstrap pipeline
    pins, match_p, match_r = _pins_for(cond, corpus, corpus_gold, tags, refset, dictionary, cfg)
    bcfg = BootstrapConfig(
        iterations=cfg.iterations if cond.iterative else 0,
        round_train=cfg.train_cfg(cfg.round_epochs, Objective.MARGINAL),
        seed_train=cfg.train_cfg(cfg.seed_epochs, Objective.MARGINAL),
        final_train=cfg.train_cfg(cfg.final_epochs, Objective.SEQUENCE),
    )
    model, trace = iterative_train(seed_ds, corpus, tags, bcfg, pins=pins, heldout=test)
    seed_report = trace.rows[0].report
    if cond.output == "crf":
        model = finalize(model, seed_ds, corpus, tags, bcfg, pins=pins)
        aug = evaluate_model(model, test, mode="hard")
    else:
        aug = evaluate_model(model, test, mode="soft")
    return GridRow(cond, seed_report, aug, match_p, match_r, trace, model)


def run_experiment_grid(
    gold: Dataset,
    tags: TagSet,
    refset: ReferenceSet,
    dictionary,
    conditions=None,
    cfg: GridConfig | None = None,
):
    """Split gold into train/test, derive the seed/corpus partition, run
    every condition, and return the rows (in condition order)."""
    cfg = cfg or GridConfig()
    conditions = conditions if conditions is not None else default_conditions()
    train_gold, _, test = split_seed(gold, 1.0 - cfg.test_fraction, cfg.rng_seed)
    seed_ds, corpus, corpus_gold = split_seed(train_gold, cfg.seed_fraction, cfg.rng_seed + 1)
    return [
        run_condition(
            cond, tags, train_gold, seed_ds, corpus, corpus_gold, test,
            refset, dictionary, cfg,
        )
        for cond in conditions
    ]


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------

def _fmt_pct(x):
    return "" if x is None else f"{100.0 * x:.2f}"


def write_grid_tsv(rows, path):
    """Machine-readable grid report; floats written exactly."""
    header = [
        "condition", "true_labels", "ref_policy", "predicted", "iterative",
        "output", "matcher_precision", "matcher_recall",
        "seed_precision", "seed_recall", "seed_f1",
        "aug_precision", "aug_recall", "aug_f1",
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            c = row.condition
            cols = [
                c.cid, c.true_labels, c.ref_policy or "none",
                "yes" if c.predicted else "no",
                "yes" if c.iterative else "no",
                c.output,
            ]
            for v in (row.matcher_precision, row.matcher_recall):
                cols.append("" if v is None else repr(float(v)))
            for rep in (row.seed_report, row.aug_report):
                if rep is None:
                    cols.extend(["", "", ""])
                else:
                    cols.extend(repr(float(v)) for v in (rep.precision, rep.recall, rep.f1))
            fh.write("\t".join(cols) + "\n")


def format_grid_table(rows) -> str:
    """Human-readable table with percentage scores."""
    header = (
        f"{'cond':<5} {'labels':<16} {'policy':<6} {'out':<8} "
        f"{'match P':>8} {'match R':>8} "
        f"{'seed P':>7} {'seed R':>7} {'seed F1':>8} "
        f"{'aug P':>7} {'aug R':>7} {'aug F1':>8}"
    )
    lines = [header, "-" * len(header)]
    for row in rows:
        c = row.condition
        seed = row.seed_report
        aug = row.aug_report
        lines.append(
            f"{c.cid:<5} {c.true_labels:<16} {c.ref_policy or '-':<6} {c.output:<8} "
            f"{_fmt_pct(row.matcher_precision):>8} {_fmt_pct(row.matcher_recall):>8} "
            f"{_fmt_pct(seed.precision if seed else None):>7} "
            f"{_fmt_pct(seed.recall if seed else None):>7} "
            f"{_fmt_pct(seed.f1 if seed else None):>8} "
            f"{_fmt_pct(aug.precision):>7} {_fmt_pct(aug.recall):>7} {_fmt_pct(aug.f1):>8}"
        )
    return "\n".join(lines)
