"""Feature-based linear-chain sequence tagger with soft and hard prediction.

The model assigns a sentence-level score to a tag sequence y:

    score(y | x) = sum_i emission(x, i, y_i) + sum_i transition(y_{i-1}, y_i)

where emissions are sums of learned weights over sparse indicator features
of token windows. Two inference modes are exposed:

* soft: per-token posterior marginals P(y_i = t | x) via forward-backward,
  the probabilistic analogue of a per-token softmax output;
* hard: the single most probable sequence via Viterbi decoding, the
  CRF-style output.

Two training objectives are supported, both optimized by per-sentence SGD
with an inverse-time learning-rate decay and L2 regularization:

* MARGINAL: cross-entropy between the model's posterior marginals and
  per-token soft target rows (accepts mixed one-hot / probabilistic rows);
* SEQUENCE: conditional log-likelihood of hard tag sequences.

All dynamic programs run in log space. Tie-breaking in argmax/Viterbi is
by lowest tag index, so results are deterministic.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .corpus import (
    Dataset,
    HardLabeling,
    Provenance,
    Sentence,
    SoftLabeling,
    TagSet,
    bio_repair,
)
from .errors import EmptyDataset, LabelLengthMismatch, ModelTagSetMismatch, WeaknerError

MODEL_FORMAT = "weakner-model"
MODEL_VERSION = 1


def _shape(text: str) -> str:
    return "".join(
        "X" if c.isupper() else "x" if c.islower() else "d" if c.isdigit() else c
        for c in text
    )


@dataclass(frozen=True)
class FeatureExtractor:
    """Deterministic sparse features of a token in its sentence context.

    Templates: token identity, lowercased token, word shape, prefixes and
    suffixes up to length 3, and neighbor token identities within the
    window radius (sentence boundaries padded with <s> / </s>).
    """

    window: int = 2

    def features(self, sentence: Sentence):
        texts = sentence.texts()
        n = len(texts)
        out = []
        for i, text in enumerate(texts):
            feats = [f"w={text}", f"lw={text.lower()}", f"shape={_shape(text)}"]
            for k in (1, 2, 3):
                if len(text) >= k:
                    feats.append(f"pre{k}={text[:k]}")
                    feats.append(f"suf{k}={text[-k:]}")
            for d in range(-self.window, self.window + 1):
                if d == 0:
                    continue
                j = i + d
                neighbor = texts[j] if 0 <= j < n else ("<s>" if d < 0 else "</s>")
                feats.append(f"w[{d}]={neighbor}")
            out.append(feats)
        return out


class Objective(enum.Enum):
    MARGINAL = "marginal"
    SEQUENCE = "sequence"


@dataclass
class TrainConfig:
    """SGD settings. The effective rate at global epoch e (the model's epoch
    counter keeps running across fine-tuning calls) is

        learning_rate / (1 + decay * e)
    """

    epochs: int = 10
    learning_rate: float = 0.2
    decay: float = 0.05
    l2: float = 1e-4
    rng_seed: int = 0
    objective: Objective = Objective.MARGINAL

    def __post_init__(self):
        if self.epochs < 1:
            raise WeaknerError("epochs must be >= 1")
        if self.learning_rate <= 0 or self.decay < 0:
            raise WeaknerError("learning_rate must be > 0 and decay >= 0")
        if self.l2 < 0:
            raise WeaknerError("l2 must be >= 0")


class TaggerModel:
    """Emission + transition weights over a frozen-on-predict feature index."""

    def __init__(self, tags: TagSet, window: int = 2):
        self.tags = tags
        self.extractor = FeatureExtractor(window)
        self.feature_index = {}
        self.weights = np.zeros((0, len(tags)))        # (n_features, n_tags)
        self.transitions = np.zeros((len(tags), len(tags)))
        self.epochs_trained = 0

    @property
    def window(self) -> int:
        return self.extractor.window

    def clone(self) -> "TaggerModel":
        other = TaggerModel(self.tags, self.window)
        other.feature_index = dict(self.feature_index)
        other.weights = self.weights.copy()
        other.transitions = self.transitions.copy()
        other.epochs_trained = self.epochs_trained
        return other

    # -- feature plumbing ---------------------------------------------------

    def _grow_features(self, sentences):
        """Assign ids to unseen feature strings; extend weight rows with zeros."""
        for sent in sentences:
            for feats in self.extractor.features(sent):
                for f in feats:
                    if f not in self.feature_index:
                        self.feature_index[f] = len(self.feature_index)
        n_new = len(self.feature_index) - len(self.weights)
        if n_new:
            self.weights = np.vstack(
                [self.weights, np.zeros((n_new, len(self.tags)))]
            )

    def _feature_ids(self, sentence: Sentence):
        """Known feature ids per position (unknown features are ignored)."""
        index = self.feature_index
        return [
            [index[f] for f in feats if f in index]
            for feats in self.extractor.features(sentence)
        ]

    def emissions(self, sentence: Sentence) -> np.ndarray:
        """Per-token emission score rows (n_tokens, n_tags)."""
        ids = self._feature_ids(sentence)
        E = np.zeros((len(ids), len(self.tags)))
        for i, row in enumerate(ids):
            if row:
                E[i] = self.weights[row].sum(axis=0)
        return E

    # -- inference ----------------------------------------------------------

    def predict_soft(self, sentence: Sentence) -> SoftLabeling:
        """Posterior tag marginals per token, provenance PREDICTED."""
        E = self.emissions(sentence)
        alpha, beta, log_z = _forward_backward(E, self.transitions)
        mu = np.exp(alpha + beta - log_z)
        mu /= mu.sum(axis=1, keepdims=True)
        prov = np.full(len(mu), Provenance.PREDICTED, dtype=np.int8)
        return SoftLabeling(mu, prov)

    def predict_hard(self, sentence: Sentence) -> HardLabeling:
        """Viterbi decode; ties broken by lower tag index."""
        E = self.emissions(sentence)
        return _viterbi(E, self.transitions)

    def sequence_score(self, sentence: Sentence, labels) -> float:
        """Joint (unnormalized) score of one tag sequence."""
        E = self.emissions(sentence)
        y = np.asarray(labels)
        score = E[np.arange(len(y)), y].sum()
        if len(y) > 1:
            score += self.transitions[y[:-1], y[1:]].sum()
        return float(score)

    # -- serialization ------------------------------------------------------

    def save(self, path):
        """Write a deterministic, bit-exact reloadable model file."""
        feats = [None] * len(self.feature_index)
        for f, i in self.feature_index.items():
            feats[i] = f
        header = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "entity_types": list(self.tags.entity_types),
            "window": self.window,
            "epochs_trained": self.epochs_trained,
            "features": feats,
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8"))
            fh.write(b"\n")
            fh.write(np.ascontiguousarray(self.weights, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.transitions, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "TaggerModel":
        with open(path, "rb") as fh:
            blob = fh.read()
        head, _, body = blob.partition(b"\n")
        header = json.loads(head.decode("utf-8"))
        if header.get("format") != MODEL_FORMAT or header.get("version") != MODEL_VERSION:
            raise WeaknerError(f"not a version-{MODEL_VERSION} model file: {path}")
        model = cls(TagSet(tuple(header["entity_types"])), header["window"])
        model.epochs_trained = header["epochs_trained"]
        model.feature_index = {f: i for i, f in enumerate(header["features"])}
        n_feat, n_tag = len(model.feature_index), len(model.tags)
        need = (n_feat + n_tag) * n_tag * 8
        if len(body) != need:
            raise WeaknerError(f"model file truncated: {path}")
        flat = np.frombuffer(body, dtype="<f8")
        model.weights = flat[: n_feat * n_tag].reshape(n_feat, n_tag).copy()
        model.transitions = flat[n_feat * n_tag:].reshape(n_tag, n_tag).copy()
        return model


# ---------------------------------------------------------------------------
# Log-space dynamic programs
# ---------------------------------------------------------------------------

def _logsumexp(x, axis):
    m = x.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def _forward_backward(E, T):
    """Log-space alpha, beta and the log partition function."""
    n, k = E.shape
    alpha = np.empty((n, k))
    beta = np.zeros((n, k))
    alpha[0] = E[0]
    for i in range(1, n):
        alpha[i] = E[i] + _logsumexp(alpha[i - 1][:, None] + T, axis=0)
    for i in range(n - 2, -1, -1):
        beta[i] = _logsumexp(T + (E[i + 1] + beta[i + 1])[None, :], axis=1)
    log_z = float(_logsumexp(alpha[-1], axis=0))
    return alpha, beta, log_z


def _viterbi(E, T):
    n, k = E.shape
    delta = E[0]
    back = np.zeros((n, k), dtype=np.intp)
    for i in range(1, n):
        scores = delta[:, None] + T
        back[i] = scores.argmax(axis=0)           # first max = lowest prev tag
        delta = E[i] + scores.max(axis=0)
    path = [int(delta.argmax())]
    for i in range(n - 1, 0, -1):
        path.append(int(back[i, path[-1]]))
    path.reverse()
    return path


def _pairwise_marginals(E, T, alpha, beta, log_z):
    """xi[i][s, t] = P(y_i = s, y_{i+1} = t | x), for i = 0 .. n-2."""
    n, k = E.shape
    xi = np.empty((max(n - 1, 0), k, k))
    for i in range(n - 1):
        xi[i] = np.exp(
            alpha[i][:, None] + T + (E[i + 1] + beta[i + 1])[None, :] - log_z
        )
    return xi


# ---------------------------------------------------------------------------
# Objectives: per-sentence loss and analytic gradients
# ---------------------------------------------------------------------------

def _marginal_loss_grad(E, T, q):
    """Cross-entropy -sum q log mu and its exact gradients wrt E and T.

    The gradient is reverse-mode differentiation through the log-space
    forward and backward recursions, so it matches finite differences of
    the loss to machine precision.
    """
    n, k = E.shape
    alpha, beta, log_z = _forward_backward(E, T)
    log_mu = alpha + beta - log_z
    loss = -(q * log_mu).sum()

    ga = -q.copy()
    gb = -q.copy()
    gE = np.zeros_like(E)
    gT = np.zeros_like(T)

    # d loss / d log_z = sum(q); log_z = logsumexp(alpha[n-1])
    ga[n - 1] += q.sum() * np.exp(alpha[n - 1] - log_z)

    # alpha recursion: alpha[i] = E[i] + lse_s(alpha[i-1][s] + T[s, t])
    for i in range(n - 1, 0, -1):
        # soft backpointers: P(prev = s | cur = t, prefix), columns sum to 1
        back = np.exp(alpha[i - 1][:, None] + T - (alpha[i] - E[i])[None, :])
        gE[i] += ga[i]
        gT += back * ga[i][None, :]
        ga[i - 1] += back @ ga[i]
    gE[0] += ga[0]

    # beta recursion: beta[i][s] = lse_t(T[s, t] + E[i+1][t] + beta[i+1][t])
    for i in range(n - 1):
        fwd = np.exp(T + (E[i + 1] + beta[i + 1])[None, :] - beta[i][:, None])
        gT += fwd * gb[i][:, None]
        down = fwd.T @ gb[i]
        gE[i + 1] += down
        gb[i + 1] += down

    return loss, gE, gT


def _sequence_loss_grad(E, T, y):
    """Negative conditional log-likelihood of the tag sequence y, plus the
    classic expected-minus-empirical sufficient-statistics gradient."""
    n, k = E.shape
    y = np.asarray(y)
    alpha, beta, log_z = _forward_backward(E, T)
    score = E[np.arange(n), y].sum()
    if n > 1:
        score += T[y[:-1], y[1:]].sum()
    loss = log_z - score

    gE = np.exp(alpha + beta - log_z)
    gE[np.arange(n), y] -= 1.0
    gT = np.zeros_like(T)
    if n > 1:
        gT = _pairwise_marginals(E, T, alpha, beta, log_z).sum(axis=0)
        np.subtract.at(gT, (y[:-1], y[1:]), 1.0)
    return loss, gE, gT


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

class _Prepared:
    """Per-sentence tensors fixed across epochs: feature rows and targets."""

    __slots__ = (
        "rows", "seg_starts", "pos_of_row", "uids", "inv", "target", "n", "dense",
    )

    def __init__(self, model, sentence, target):
        ids = model._feature_ids(sentence)
        self.n = len(ids)
        flat, pos = [], []
        for i, row in enumerate(ids):
            flat.extend(row)
            pos.extend([i] * len(row))
        self.rows = np.asarray(flat, dtype=np.intp)
        self.pos_of_row = np.asarray(pos, dtype=np.intp)
        starts = np.zeros(self.n, dtype=np.intp)
        for i in range(1, self.n):
            starts[i] = starts[i - 1] + len(ids[i - 1])
        self.seg_starts = starts
        # reduceat needs every position to own at least one feature row
        self.dense = all(ids)
        self.uids, self.inv = np.unique(self.rows, return_inverse=True)
        self.target = target


def _targets_for(labels, tags: TagSet, objective: Objective):
    if labels is None:
        raise EmptyDataset("training requires labels on every sentence")
    if objective is Objective.MARGINAL:
        if isinstance(labels, SoftLabeling):
            return labels.dist
        dist = np.zeros((len(labels), len(tags)))
        dist[np.arange(len(labels)), labels] = 1.0
        return dist
    if isinstance(labels, SoftLabeling):
        return harden(labels, tags)
    return list(labels)


def _sentence_loss_grad(E, T, prep, objective: Objective):
    if objective is Objective.MARGINAL:
        return _marginal_loss_grad(E, T, prep.target)
    return _sequence_loss_grad(E, T, prep.target)


def _emissions_from_prepared(weights, prep):
    if len(prep.rows) == 0:
        return np.zeros((prep.n, weights.shape[1]))
    if prep.dense:
        return np.add.reduceat(weights[prep.rows], prep.seg_starts, axis=0)
    E = np.zeros((prep.n, weights.shape[1]))
    np.add.at(E, prep.pos_of_row, weights[prep.rows])
    return E


def train(
    data: Dataset,
    tags: TagSet,
    cfg: TrainConfig,
    init: TaggerModel | None = None,
) -> TaggerModel:
    """Train (or, when init is given, fine-tune) a tagger.

    Fine-tuning resumes from the init model's weights AND its epoch counter,
    so the learning-rate decay continues where the previous call stopped.
    The feature index grows to cover the new data; the init model itself is
    never mutated. L2 is applied as a once-per-epoch weight decay, matching
    the regularized objective's full-batch pull.

    Deterministic given (data, cfg, init): sentence order is shuffled with a
    generator seeded from (rng_seed, global epoch).
    """
    if len(data) == 0:
        raise EmptyDataset("no sentences to train on")
    for sent, lab in zip(data.sentences, data.labels):
        if lab is None:
            raise EmptyDataset("training requires labels on every sentence")
        if len(lab) != len(sent):
            raise LabelLengthMismatch(f"{len(lab)} labels for {len(sent)} tokens")

    if init is not None:
        if init.tags != tags:
            raise ModelTagSetMismatch(f"init model tags {init.tags} != {tags}")
        model = init.clone()
    else:
        model = TaggerModel(tags)

    model._grow_features(data.sentences)
    prepared = [
        _Prepared(model, sent, _targets_for(lab, tags, cfg.objective))
        for sent, lab in zip(data.sentences, data.labels)
    ]

    W, T = model.weights, model.transitions
    n_sent = len(prepared)
    n_tags = len(tags)
    for _ in range(cfg.epochs):
        epoch = model.epochs_trained
        rate = cfg.learning_rate / (1.0 + cfg.decay * epoch)
        order = np.random.default_rng([cfg.rng_seed, epoch]).permutation(n_sent)
        for si in order:
            prep = prepared[si]
            E = _emissions_from_prepared(W, prep)
            _, gE, gT = _sentence_loss_grad(E, T, prep, cfg.objective)
            if len(prep.rows):
                per_row = gE[prep.pos_of_row]
                contrib = np.empty((len(prep.uids), n_tags))
                for t in range(n_tags):
                    contrib[:, t] = np.bincount(
                        prep.inv, weights=per_row[:, t], minlength=len(prep.uids)
                    )
                W[prep.uids] -= rate * contrib
            T -= rate * gT
        if cfg.l2 > 0.0:
            shrink = max(0.0, 1.0 - rate * cfg.l2)
            W *= shrink
            T *= shrink
        model.epochs_trained += 1
    return model


def dataset_loss_and_gradient(model: TaggerModel, data: Dataset, cfg: TrainConfig):
    """Full-batch objective value and analytic gradient for the model's
    current weights: sum of per-sentence losses plus (l2/2)||w||^2.

    Returns (loss, grad_weights, grad_transitions). Unseen features in
    `data` are ignored (the gradient is wrt the existing weight vector).
    """
    gW = np.zeros_like(model.weights)
    gT = np.zeros_like(model.transitions)
    total = 0.0
    for sent, lab in zip(data.sentences, data.labels):
        prep = _Prepared(model, sent, _targets_for(lab, model.tags, cfg.objective))
        E = _emissions_from_prepared(model.weights, prep)
        loss, gE, gTs = _sentence_loss_grad(E, model.transitions, prep, cfg.objective)
        total += loss
        if len(prep.rows):
            np.add.at(gW, prep.rows, gE[prep.pos_of_row])
        gT += gTs
    if cfg.l2 > 0.0:
        total += 0.5 * cfg.l2 * (
            float((model.weights ** 2).sum()) + float((model.transitions ** 2).sum())
        )
        gW += cfg.l2 * model.weights
        gT += cfg.l2 * model.transitions
    return total, gW, gT


def dataset_loss(model: TaggerModel, data: Dataset, cfg: TrainConfig) -> float:
    return dataset_loss_and_gradient(model, data, cfg)[0]


def harden(soft: SoftLabeling, tags: TagSet) -> HardLabeling:
    """Per-token argmax (lowest index wins ties) followed by BIO repair."""
    idx = [int(i) for i in np.argmax(soft.dist, axis=1)]
    return bio_repair(idx, tags)


def predict_dataset_soft(model: TaggerModel, data: Dataset) -> Dataset:
    """Model marginals for every sentence (labels of `data` are ignored)."""
    labels = [model.predict_soft(s) for s in data.sentences]
    return Dataset(list(data.sentences), labels, data.kind)


def predict_dataset_hard(model: TaggerModel, data: Dataset) -> Dataset:
    labels = [model.predict_hard(s) for s in data.sentences]
    return Dataset(list(data.sentences), labels, data.kind)
