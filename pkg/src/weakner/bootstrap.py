"""Iterative weakly-supervised training with gazetteer-pinned soft labels.

The loop: train a first model on the labeled seed, then repeatedly
(1) soft-label the unlabeled corpus with the current model, (2) overwrite
the rows of every token covered by a reference match with a one-hot pin
(score 1 on the B-/I- tag of the match), and (3) fine-tune the model on
seed + relabeled corpus, resuming from the previous weights. Pins do not
depend on the model, so matches are computed once and reused.

An optional final step hardens the last corpus labeling and retrains a
fresh sequence-likelihood (CRF-style) model from scratch on it.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import Dataset, Provenance, SoftLabeling, TagSet
from .errors import EmptyDataset, ModelTagSetMismatch, WeaknerError
from .metrics import EvalReport, evaluate_model
from .refset import MatchPolicy, ReferenceSet, find_matches
from .tagger import Objective, TaggerModel, TrainConfig, harden, train


@dataclass
class BootstrapConfig:
    """Knobs of the iterative loop.

    round_train drives every fine-tuning round (MARGINAL objective);
    seed_train, when given, trains the initial model instead (more epochs
    are often useful there since the seed is small). final_train configures
    the optional from-scratch SEQUENCE retrain; by default it reuses
    round_train with the objective switched.
    """

    iterations: int = 10
    round_train: TrainConfig = field(default_factory=TrainConfig)
    seed_train: TrainConfig | None = None
    final_retrain: bool = True
    final_train: TrainConfig | None = None
    refset: ReferenceSet | None = None
    policy: MatchPolicy | None = None

    def __post_init__(self):
        if self.iterations < 0:
            raise WeaknerError("iterations must be >= 0")

    def seed_cfg(self) -> TrainConfig:
        return self.seed_train if self.seed_train is not None else self.round_train

    def final_cfg(self) -> TrainConfig:
        if self.final_train is not None:
            return self.final_train
        return replace(self.round_train, objective=Objective.SEQUENCE)


@dataclass
class IterationRow:
    iteration: int
    checkpoint_id: str
    pinned_tokens: int
    mean_entropy: float
    report: EvalReport | None = None


@dataclass
class IterationTrace:
    """One row per model M_0 .. M_K."""

    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def write_tsv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("iteration\tcheckpoint\tpinned_tokens\tmean_entropy\tprecision\trecall\tf1\n")
            for row in self.rows:
                cols = [
                    str(row.iteration),
                    row.checkpoint_id,
                    str(row.pinned_tokens),
                    repr(float(row.mean_entropy)),
                ]
                if row.report is None:
                    cols.extend(["", "", ""])
                else:
                    cols.extend(
                        repr(float(v))
                        for v in (row.report.precision, row.report.recall, row.report.f1)
                    )
                fh.write("\t".join(cols) + "\n")


def compute_pins(corpus: Dataset, cfg: BootstrapConfig):
    """Reference matches used as label pins; empty when no refset is set."""
    if cfg.refset is None or len(cfg.refset) == 0:
        return []
    policy = cfg.policy if cfg.policy is not None else MatchPolicy()
    return find_matches(corpus, cfg.refset, policy)


def relabel(corpus: Dataset, model: TaggerModel, matches) -> Dataset:
    """Soft-label every corpus token with the model's marginals, then
    overwrite match-covered tokens with one-hot pins.

    The first token of a match span gets probability 1 on B-type, the rest
    on I-type; provenance flips to REFERENCE. Pins replace the predicted
    row outright (no blending), so they are idempotent across iterations.
    """
    by_sentence = {}
    for m in matches:
        if m.entity_type not in model.tags.entity_types:
            raise ModelTagSetMismatch(
                f"match type {m.entity_type!r} not in model tags {model.tags.entity_types}"
            )
        by_sentence.setdefault(m.sentence, []).append(m)

    n_tags = len(model.tags)
    labels = []
    for s, sent in enumerate(corpus.sentences):
        soft = model.predict_soft(sent)
        dist, prov = soft.dist, soft.provenance
        for m in by_sentence.get(s, ()):
            if m.last >= len(sent):
                raise WeaknerError(f"match {m} out of bounds")
            for i in range(m.first, m.last + 1):
                row = np.zeros(n_tags)
                tag = (
                    model.tags.b_index(m.entity_type)
                    if i == m.first
                    else model.tags.i_index(m.entity_type)
                )
                row[tag] = 1.0
                dist[i] = row
                prov[i] = Provenance.REFERENCE
        labels.append(SoftLabeling(dist, prov))
    return Dataset(list(corpus.sentences), labels, corpus.kind)


def _labeling_stats(labeled: Dataset):
    """(pinned token count, mean entropy in nats of the PREDICTED rows)."""
    pinned = 0
    entropy_sum = 0.0
    n_pred = 0
    for soft in labeled.labels:
        prov = soft.provenance
        pinned += int((prov == Provenance.REFERENCE).sum())
        pred_rows = soft.dist[prov == Provenance.PREDICTED]
        if len(pred_rows):
            p = np.clip(pred_rows, 1e-300, None)
            entropy_sum += float(-(pred_rows * np.log(p)).sum())
            n_pred += len(pred_rows)
    return pinned, (entropy_sum / n_pred if n_pred else math.nan)


def _combine(seed: Dataset, labeled: Dataset) -> Dataset:
    return Dataset(
        list(seed.sentences) + list(labeled.sentences),
        list(seed.labels) + list(labeled.labels),
        seed.kind,
    )


def _checkpoint(model, iteration, checkpoint_dir):
    cid = f"model_iter_{iteration:02d}"
    if checkpoint_dir is not None:
        model.save(os.path.join(checkpoint_dir, cid + ".model"))
    return cid


def iterative_train(
    seed: Dataset,
    corpus: Dataset,
    tags: TagSet,
    cfg: BootstrapConfig,
    pins=None,
    heldout: Dataset | None = None,
    checkpoint_dir=None,
):
    """Run the full iterative loop; returns (final model, trace).

    pins: precomputed match list; when None they are derived from the
    config's reference set and policy. heldout, when given, adds per-round
    P/R/F1 (softmax-argmax output) to the trace. checkpoint_dir, when
    given, receives one model file per round plus trace.tsv.
    """
    if len(seed) == 0:
        raise EmptyDataset("empty seed dataset")
    if not seed.is_fully_labeled():
        raise WeaknerError("seed dataset must be fully labeled")
    if pins is None:
        pins = compute_pins(corpus, cfg)
    if checkpoint_dir is not None:
        os.makedirs(checkpoint_dir, exist_ok=True)

    trace = IterationTrace()
    model = train(seed, tags, cfg.seed_cfg(), init=None)
    trace.rows.append(
        IterationRow(
            0,
            _checkpoint(model, 0, checkpoint_dir),
            0,
            math.nan,
            evaluate_model(model, heldout, mode="soft") if heldout is not None else None,
        )
    )

    for i in range(1, cfg.iterations + 1):
        labeled = relabel(corpus, model, pins)
        pinned, entropy = _labeling_stats(labeled)
        model = train(_combine(seed, labeled), tags, cfg.round_train, init=model)
        trace.rows.append(
            IterationRow(
                i,
                _checkpoint(model, i, checkpoint_dir),
                pinned,
                entropy,
                evaluate_model(model, heldout, mode="soft") if heldout is not None else None,
            )
        )

    if checkpoint_dir is not None:
        trace.write_tsv(os.path.join(checkpoint_dir, "trace.tsv"))
    return model, trace


def finalize(
    model: TaggerModel,
    seed: Dataset,
    corpus: Dataset,
    tags: TagSet,
    cfg: BootstrapConfig,
    pins=None,
) -> TaggerModel:
    """Harden the final corpus labeling and train a fresh sequence-mode
    model on seed + hardened corpus (the CRF-style finishing step)."""
    if pins is None:
        pins = compute_pins(corpus, cfg)
    if len(corpus) == 0:
        return train(seed, tags, cfg.final_cfg(), init=None)
    labeled = relabel(corpus, model, pins)
    hardened = Dataset(
        list(labeled.sentences),
        [harden(soft, tags) for soft in labeled.labels],
        labeled.kind,
    )
    return train(_combine(seed, hardened), tags, cfg.final_cfg(), init=None)
