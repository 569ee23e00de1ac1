"""Inference and training of the linear-chain tagger, checked against
exhaustive enumeration and central finite differences."""

import itertools

import numpy as np
import pytest

from weakner.corpus import (
    Dataset,
    DatasetKind,
    Provenance,
    SoftLabeling,
    TagSet,
    sentence_from_texts,
    soften,
)
from weakner.errors import EmptyDataset, ModelTagSetMismatch, WeaknerError
from weakner.tagger import (
    FeatureExtractor,
    Objective,
    TaggerModel,
    TrainConfig,
    dataset_loss,
    dataset_loss_and_gradient,
    harden,
    train,
)

PROT = TagSet(("PROT",))
TWO = TagSet(("PROT", "CELL"))

VOCAB = ["p53", "binds", "MDM2", "the", "TIGAR", "assay", "x1", "y2"]


def random_sentence(rng, max_len=6):
    n = int(rng.integers(1, max_len + 1))
    return sentence_from_texts([VOCAB[int(rng.integers(len(VOCAB)))] for _ in range(n)])


def random_model(rng, tags, sentences, scale=1.0):
    """A model whose feature index covers `sentences`, with random weights."""
    model = TaggerModel(tags)
    model._grow_features(sentences)
    model.weights = rng.normal(scale=scale, size=model.weights.shape)
    model.transitions = rng.normal(scale=scale, size=model.transitions.shape)
    return model


def enumerate_posteriors(model, sentence):
    """Brute-force per-token marginals: softmax over all tag sequences."""
    n, k = len(sentence), len(model.tags)
    scores = np.array(
        [model.sequence_score(sentence, y) for y in itertools.product(range(k), repeat=n)]
    )
    m = scores.max()
    probs = np.exp(scores - m)
    probs /= probs.sum()
    marg = np.zeros((n, k))
    for prob, y in zip(probs, itertools.product(range(k), repeat=n)):
        for i, t in enumerate(y):
            marg[i, t] += prob
    return marg


def enumerate_argmax(model, sentence):
    """Brute-force best sequence (unique for continuous random weights)."""
    n, k = len(sentence), len(model.tags)
    best, best_score = None, -np.inf
    for y in itertools.product(range(k), repeat=n):
        s = model.sequence_score(sentence, y)
        if s > best_score:
            best, best_score = list(y), s
    return best, best_score


class TestInferenceOracles:
    def test_marginals_match_enumeration(self):
        rng = np.random.default_rng(42)
        for _ in range(40):
            tags = TWO if rng.random() < 0.5 else PROT
            sent = random_sentence(rng)
            model = random_model(rng, tags, [sent])
            soft = model.predict_soft(sent)
            expected = enumerate_posteriors(model, sent)
            assert np.abs(soft.dist - expected).max() < 1e-9
            assert np.abs(soft.dist.sum(axis=1) - 1.0).max() < 1e-9
            assert all(p == Provenance.PREDICTED for p in soft.provenance)

    def test_viterbi_matches_enumeration(self):
        rng = np.random.default_rng(43)
        for _ in range(40):
            tags = TWO if rng.random() < 0.5 else PROT
            sent = random_sentence(rng)
            model = random_model(rng, tags, [sent])
            got = model.predict_hard(sent)
            expected, best_score = enumerate_argmax(model, sent)
            assert got == expected
            assert model.sequence_score(sent, got) == pytest.approx(best_score)

    def test_zero_weights_uniform_marginals(self):
        sent = sentence_from_texts(["a", "b", "c"])
        model = TaggerModel(PROT)
        soft = model.predict_soft(sent)
        assert np.allclose(soft.dist, 1.0 / 3.0)

    def test_zero_weights_decode_all_outside(self):
        sent = sentence_from_texts(["a", "b", "c", "d", "e", "f"])
        model = TaggerModel(TWO)
        assert model.predict_hard(sent) == [0] * 6

    def test_viterbi_beats_random_sequences(self):
        rng = np.random.default_rng(44)
        sent = random_sentence(rng, max_len=12)
        model = random_model(rng, TWO, [sent])
        decoded = model.predict_hard(sent)
        best = model.sequence_score(sent, decoded)
        k = len(model.tags)
        for _ in range(1000):
            y = rng.integers(0, k, size=len(sent))
            assert best >= model.sequence_score(sent, y) - 1e-12

    def test_marginal_rows_sum_to_one_everywhere(self):
        rng = np.random.default_rng(45)
        sent = random_sentence(rng, max_len=6)
        model = random_model(rng, TWO, [sent], scale=3.0)
        soft = model.predict_soft(sent)
        assert np.abs(soft.dist.sum(axis=1) - 1.0).max() < 1e-9


def finite_difference(model, data, cfg, h=1e-6, n_probes=12, seed=0):
    """Central differences of dataset_loss wrt random weight coordinates."""
    rng = np.random.default_rng(seed)
    _, gW, gT = dataset_loss_and_gradient(model, data, cfg)
    checks = []
    for _ in range(n_probes):
        if rng.random() < 0.7 and model.weights.size:
            i = int(rng.integers(model.weights.shape[0]))
            j = int(rng.integers(model.weights.shape[1]))
            orig = model.weights[i, j]
            model.weights[i, j] = orig + h
            up = dataset_loss(model, data, cfg)
            model.weights[i, j] = orig - h
            down = dataset_loss(model, data, cfg)
            model.weights[i, j] = orig
            checks.append(((up - down) / (2 * h), gW[i, j]))
        else:
            i = int(rng.integers(model.transitions.shape[0]))
            j = int(rng.integers(model.transitions.shape[1]))
            orig = model.transitions[i, j]
            model.transitions[i, j] = orig + h
            up = dataset_loss(model, data, cfg)
            model.transitions[i, j] = orig - h
            down = dataset_loss(model, data, cfg)
            model.transitions[i, j] = orig
            checks.append(((up - down) / (2 * h), gT[i, j]))
    return checks


def _random_training_set(rng, tags, n_sentences=5, soft_targets=False):
    sents, labels = [], []
    k = len(tags)
    for _ in range(n_sentences):
        sent = random_sentence(rng)
        if soft_targets:
            dist = rng.dirichlet(np.ones(k), size=len(sent))
            lab = SoftLabeling(dist, np.full(len(sent), Provenance.PREDICTED, dtype=np.int8))
        else:
            lab = [int(t) for t in rng.integers(0, k, size=len(sent))]
        sents.append(sent)
        labels.append(lab)
    return Dataset(sents, labels, DatasetKind.SEED)


class TestGradients:
    @pytest.mark.parametrize("objective", [Objective.MARGINAL, Objective.SEQUENCE])
    def test_matches_finite_differences(self, objective):
        rng = np.random.default_rng(7)
        for trial in range(6):
            tags = TWO if trial % 2 else PROT
            data = _random_training_set(
                rng, tags, soft_targets=(objective is Objective.MARGINAL and trial % 3 == 0)
            )
            model = random_model(rng, tags, data.sentences, scale=0.5)
            cfg = TrainConfig(objective=objective, l2=1e-3 if trial % 2 else 0.0)
            for fd, analytic in finite_difference(model, data, cfg, seed=trial):
                assert analytic == pytest.approx(fd, rel=1e-4, abs=1e-7)


class TestTraining:
    def _one_sentence_data(self):
        sent = sentence_from_texts(["p53", "binds", "MDM2"])
        return Dataset([sent], [[1, 0, 1]], DatasetKind.SEED)

    def test_loss_decreases_monotonically(self):
        data = self._one_sentence_data()
        cfg = TrainConfig(epochs=1, learning_rate=0.1, decay=0.0, l2=0.0, rng_seed=0)
        model = None
        losses = []
        for _ in range(15):
            model = train(data, PROT, cfg, init=model)
            losses.append(dataset_loss(model, data, cfg))
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_sequence_mode_loss_decreases(self):
        data = self._one_sentence_data()
        cfg = TrainConfig(
            epochs=1, learning_rate=0.1, decay=0.0, l2=0.0, rng_seed=0,
            objective=Objective.SEQUENCE,
        )
        model = None
        losses = []
        for _ in range(15):
            model = train(data, PROT, cfg, init=model)
            losses.append(dataset_loss(model, data, cfg))
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_resume_identity_as_rate_vanishes(self):
        rng = np.random.default_rng(3)
        data = _random_training_set(rng, PROT)
        base = train(data, PROT, TrainConfig(epochs=3, rng_seed=1))
        resumed = train(data, PROT, TrainConfig(epochs=1, learning_rate=1e-12, rng_seed=1), init=base)
        assert np.allclose(resumed.weights, base.weights, atol=1e-9)
        assert np.allclose(resumed.transitions, base.transitions, atol=1e-9)
        assert resumed.epochs_trained == base.epochs_trained + 1

    def test_fine_tune_does_not_reinitialize(self):
        rng = np.random.default_rng(4)
        data = _random_training_set(rng, PROT, n_sentences=8)
        cfg = TrainConfig(epochs=4, learning_rate=0.2, rng_seed=0)
        base = train(data, PROT, cfg)
        tuned = train(data, PROT, TrainConfig(epochs=1, learning_rate=0.05, rng_seed=0), init=base)
        assert dataset_loss(tuned, data, cfg) <= dataset_loss(base, data, cfg)
        # a bounded step, not a restart
        assert np.abs(tuned.weights - base.weights).max() < 1.0
        assert base.weights.shape[0] <= tuned.weights.shape[0]

    def test_init_not_mutated(self):
        rng = np.random.default_rng(5)
        data = _random_training_set(rng, PROT)
        base = train(data, PROT, TrainConfig(epochs=2))
        snapshot = base.weights.copy()
        train(data, PROT, TrainConfig(epochs=2), init=base)
        assert np.array_equal(base.weights, snapshot)

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        data = _random_training_set(rng, TWO, n_sentences=10)
        a = train(data, TWO, TrainConfig(epochs=5, rng_seed=9))
        b = train(data, TWO, TrainConfig(epochs=5, rng_seed=9))
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.transitions, b.transitions)
        assert a.feature_index == b.feature_index

    def test_epoch_granularity_equivalence(self):
        """Running 4 epochs at once equals 4 resumed single-epoch calls:
        the schedule and shuffling depend only on the global epoch index."""
        rng = np.random.default_rng(8)
        data = _random_training_set(rng, PROT, n_sentences=6)
        whole = train(data, PROT, TrainConfig(epochs=4, rng_seed=2))
        stepped = None
        for _ in range(4):
            stepped = train(data, PROT, TrainConfig(epochs=1, rng_seed=2), init=stepped)
        assert np.array_equal(whole.weights, stepped.weights)
        assert np.array_equal(whole.transitions, stepped.transitions)

    def test_constructed_weights_drive_decode(self):
        sent = sentence_from_texts(["p53", "binds"])
        model = TaggerModel(PROT)
        model._grow_features([sent])
        model.weights[model.feature_index["w=p53"], PROT.b_index("PROT")] = 5.0
        assert model.predict_hard(sent) == [1, 0]

    def test_mixed_hard_and_soft_labels(self):
        sents = [sentence_from_texts(["p53", "x1"]), sentence_from_texts(["TIGAR"])]
        data = Dataset(
            sents,
            [[1, 0], SoftLabeling(np.array([[0.0, 1.0, 0.0]]),
                                  np.array([Provenance.SEED], dtype=np.int8))],
            DatasetKind.SEED,
        )
        model = train(data, PROT, TrainConfig(epochs=3))
        assert len(model.feature_index) > 0

    def test_empty_dataset_rejected(self):
        with pytest.raises(EmptyDataset):
            train(Dataset([], [], DatasetKind.SEED), PROT, TrainConfig())

    def test_unlabeled_sentence_rejected(self):
        data = Dataset([sentence_from_texts(["a"])], [None], DatasetKind.SEED)
        with pytest.raises(EmptyDataset):
            train(data, PROT, TrainConfig())

    def test_tag_set_mismatch_on_init(self):
        data = Dataset([sentence_from_texts(["a"])], [[0]], DatasetKind.SEED)
        base = train(data, PROT, TrainConfig(epochs=1))
        with pytest.raises(ModelTagSetMismatch):
            train(data, TWO, TrainConfig(epochs=1), init=base)

    def test_bad_config_rejected(self):
        with pytest.raises(WeaknerError):
            TrainConfig(epochs=0)
        with pytest.raises(WeaknerError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(WeaknerError):
            TrainConfig(l2=-1.0)


class TestHarden:
    def test_argmax(self):
        soft = SoftLabeling(
            np.array([[0.1, 0.8, 0.1], [0.9, 0.05, 0.05]]),
            np.full(2, Provenance.PREDICTED, dtype=np.int8),
        )
        assert harden(soft, PROT) == [1, 0]

    def test_one_hot_identity(self):
        soft = soften([0, 1, 2], PROT)
        assert harden(soft, PROT) == [0, 1, 2]

    def test_leading_inside_repaired(self):
        soft = SoftLabeling(
            np.array([[0.1, 0.2, 0.7], [0.2, 0.1, 0.7]]),
            np.full(2, Provenance.PREDICTED, dtype=np.int8),
        )
        # argmax gives [I-PROT, I-PROT]; repair turns the first into B-PROT
        assert harden(soft, PROT) == [1, 2]

    def test_tie_breaks_to_lowest_index(self):
        soft = SoftLabeling(
            np.array([[0.5, 0.5, 0.0]]),
            np.full(1, Provenance.PREDICTED, dtype=np.int8),
        )
        assert harden(soft, PROT) == [0]


class TestSerialization:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        data = _random_training_set(rng, TWO, n_sentences=6)
        model = train(data, TWO, TrainConfig(epochs=3, rng_seed=5))
        path = tmp_path / "m.model"
        model.save(path)
        back = TaggerModel.load(path)
        assert np.array_equal(back.weights, model.weights)
        assert np.array_equal(back.transitions, model.transitions)
        assert back.feature_index == model.feature_index
        assert back.tags == model.tags
        assert back.epochs_trained == model.epochs_trained

    def test_save_is_byte_deterministic(self, tmp_path):
        rng = np.random.default_rng(12)
        data = _random_training_set(rng, PROT, n_sentences=4)
        model = train(data, PROT, TrainConfig(epochs=2))
        a, b = tmp_path / "a.model", tmp_path / "b.model"
        model.save(a)
        TaggerModel.load(a).save(b)
        assert a.read_bytes() == b.read_bytes()

    def test_truncated_file_rejected(self, tmp_path):
        rng = np.random.default_rng(13)
        data = _random_training_set(rng, PROT, n_sentences=2)
        model = train(data, PROT, TrainConfig(epochs=1))
        path = tmp_path / "m.model"
        model.save(path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(WeaknerError):
            TaggerModel.load(path)

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "bad.model"
        path.write_bytes(b'{"format": "something-else"}\n')
        with pytest.raises(WeaknerError):
            TaggerModel.load(path)


class TestFeatureExtractor:
    def test_deterministic(self):
        sent = sentence_from_texts(["Flag-tagged-TIGAR", "assay"])
        fx = FeatureExtractor()
        assert fx.features(sent) == fx.features(sent)

    def test_window_and_boundaries(self):
        sent = sentence_from_texts(["a", "b", "c"])
        feats = FeatureExtractor(window=2).features(sent)
        assert "w[-1]=<s>" in feats[0]
        assert "w[-2]=<s>" in feats[1]
        assert "w[+1]=</s>" in feats[2] or "w[1]=</s>" in feats[2]
        assert any(f.startswith("shape=") for f in feats[0])

    def test_shape_feature(self):
        sent = sentence_from_texts(["MDM2"])
        feats = FeatureExtractor().features(sent)[0]
        assert "shape=XXXd" in feats

    def test_unknown_features_ignored_at_prediction(self):
        data = Dataset([sentence_from_texts(["p53"])], [[1]], DatasetKind.SEED)
        model = train(data, PROT, TrainConfig(epochs=2))
        out = model.predict_soft(sentence_from_texts(["neverseen", "tokens"]))
        assert np.abs(out.dist.sum(axis=1) - 1.0).max() < 1e-9
