"""Baselines, the logistic probe, and the convolutional classifiers."""

import numpy as np
import pytest

from acton.exceptions import (
    AlphaSumViolation,
    DimensionMismatch,
    NoLabeledSubjects,
    SingleClassTrainingSet,
)
from acton.models import (
    ConvNetClassifier,
    LogisticProbe,
    MajorityBaseline,
    MultiTaskConvNet,
    MULTITASK_ALPHAS,
    MULTITASK_ALPHAS_PRETRAINED,
    RandomBaseline,
    multitask_loss,
)
from acton.evaluation import binary_metrics, confusion


def toy_sequences(rng, n, length=12, vocab=6):
    return rng.integers(0, vocab, size=(n, length)).astype(np.int32)


def small_cnn(**kw):
    defaults = dict(task="apnea", embedding_dim=4, depth=1, n_filters=4,
                    kernel=3, pool=2, dense_units=8, dropout=0.0, lambda1=0.0,
                    lambda2=0.0, lr=0.01, batch_size=8, epochs=5, seed=0,
                    vocab_size=6)
    defaults.update(kw)
    return ConvNetClassifier(**defaults)


class TestBaselines:
    def test_majority_predicts_most_frequent(self):
        model = MajorityBaseline().fit(None, [0, 0, 1])
        assert model.predict(np.zeros((5, 2))).tolist() == [0] * 5

    def test_majority_tie_breaks_low(self):
        assert MajorityBaseline().fit(None, [1, 0]).majority_class_ == 0

    def test_random_rate_within_three_se(self):
        model = RandomBaseline(seed=3).fit(None, [0, 1])
        preds = model.predict(np.zeros((100_000, 1)))
        rate = np.mean(preds == 0)
        se = np.sqrt(0.25 / len(preds))
        assert abs(rate - 0.5) <= 3 * se

    def test_majority_has_zero_recall_on_minority(self):
        golds = np.array([0] * 50 + [1] * 50)
        model = MajorityBaseline().fit(None, [0, 0, 0, 1])
        preds = model.predict(np.zeros((100, 1)))
        m = binary_metrics(confusion(preds, golds, 2))
        assert m.recall == 0.0 and m.precision == 0.0
        assert m.specificity == 1.0


class TestLogisticProbe:
    def test_separable_toy_set_reaches_total_accuracy(self):
        rng = np.random.default_rng(0)
        x = np.vstack([rng.normal(-2, 0.3, size=(40, 2)),
                       rng.normal(2, 0.3, size=(40, 2))])
        y = np.array([0] * 40 + [1] * 40)
        model = LogisticProbe(lr=0.5, epochs=100, seed=1).fit(x, y)
        assert np.mean(model.predict(x) == y) == 1.0

    def test_zero_features_predict_prior_class(self):
        x = np.zeros((30, 4))
        y = np.array([1] * 20 + [0] * 10)
        model = LogisticProbe(epochs=50, seed=0).fit(x, y)
        assert np.all(model.predict(np.zeros((5, 4))) == 1)

    def test_single_class_rejected(self):
        with pytest.raises(SingleClassTrainingSet):
            LogisticProbe().fit(np.zeros((4, 2)), [1, 1, 1, 1])

    def test_three_class_one_vs_all(self):
        rng = np.random.default_rng(1)
        centers = np.array([[-3, 0], [3, 0], [0, 3]])
        x = np.vstack([rng.normal(c, 0.4, size=(30, 2)) for c in centers])
        y = np.repeat([0, 1, 2], 30)
        model = LogisticProbe(lr=0.5, epochs=200, seed=2).fit(x, y)
        assert np.mean(model.predict(x) == y) > 0.98
        assert model.W_.shape == (2, 3)

    def test_deterministic_under_seed(self):
        rng = np.random.default_rng(2)
        x, y = rng.normal(size=(50, 3)), rng.integers(0, 2, 50)
        a = LogisticProbe(seed=5).fit(x, y)
        b = LogisticProbe(seed=5).fit(x, y)
        assert np.array_equal(a.W_, b.W_)


class TestMultitaskLoss:
    def test_one_hot_selects_single_task(self):
        losses = {"a": 2.0, "b": 9.0, "c": 9.0, "d": 9.0}
        alphas = {"a": 1.0, "b": 0.0, "c": 0.0, "d": 0.0}
        assert multitask_loss(losses, alphas) == 2.0

    def test_uniform_mixture_hand_evaluated(self):
        losses = dict(zip("abcd", [1.0, 2.0, 3.0, 4.0]))
        alphas = {k: 0.25 for k in "abcd"}
        assert multitask_loss(losses, alphas) == pytest.approx(2.5, abs=1e-12)

    @pytest.mark.parametrize("preset", [MULTITASK_ALPHAS, MULTITASK_ALPHAS_PRETRAINED])
    def test_published_presets_sum_to_one(self, preset):
        assert abs(sum(preset.values()) - 1.0) < 1e-9
        losses = {k: 1.0 for k in preset}
        assert multitask_loss(losses, preset) == pytest.approx(1.0, abs=1e-12)

    def test_absent_task_mass_renormalizes(self):
        losses = {"a": 2.0, "b": None}
        alphas = {"a": 0.5, "b": 0.5}
        assert multitask_loss(losses, alphas) == pytest.approx(2.0, abs=1e-12)

    def test_linear_in_each_component(self):
        alphas = {"a": 0.3, "b": 0.7}
        base = multitask_loss({"a": 1.0, "b": 2.0}, alphas)
        doubled = multitask_loss({"a": 2.0, "b": 4.0}, alphas)
        assert doubled == pytest.approx(2 * base, abs=1e-12)

    def test_bad_alpha_sum_rejected(self):
        with pytest.raises(AlphaSumViolation):
            multitask_loss({"a": 1.0}, {"a": 0.9})


class TestConvNetClassifier:
    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(3)
        x = toy_sequences(rng, 10)
        y = rng.integers(0, 2, 10)
        model = small_cnn(epochs=2).fit(x, y)
        probs = model.predict_proba(x)
        assert np.all(np.abs(probs.sum(axis=1) - 1.0) < 1e-12)

    def test_zero_initialized_head_gives_uniform(self):
        rng = np.random.default_rng(4)
        x = toy_sequences(rng, 6)
        model = small_cnn(epochs=1).fit(x, rng.integers(0, 2, 6))
        model.core_.heads["apnea"].W[:] = 0.0
        model.core_.heads["apnea"].b[:] = 0.0
        probs = model.predict_proba(x)
        assert np.allclose(probs, 0.5)

    def test_bit_identical_under_seed(self):
        rng = np.random.default_rng(5)
        x = toy_sequences(rng, 12)
        y = rng.integers(0, 2, 12)
        a = small_cnn(dropout=0.5, epochs=3, seed=9).fit(x, y)
        b = small_cnn(dropout=0.5, epochs=3, seed=9).fit(x, y)
        for name, arr in a.core_.params().items():
            assert np.array_equal(arr, b.core_.params()[name]), name
        assert np.array_equal(a.predict_proba(x), b.predict_proba(x))

    def test_overfits_tiny_dataset(self):
        rng = np.random.default_rng(6)
        x = toy_sequences(rng, 8, length=16)
        y = np.array([0, 1] * 4)
        model = small_cnn(epochs=200, lr=0.02).fit(x, y)
        assert np.mean(model.predict(x) == y) == 1.0

    def test_requires_labels(self):
        with pytest.raises(NoLabeledSubjects):
            small_cnn().fit(toy_sequences(np.random.default_rng(0), 4), [-1] * 4)

    def test_pretrained_rows_copied_bit_exactly(self):
        rng = np.random.default_rng(7)
        table = rng.normal(size=(6, 4))
        x = toy_sequences(rng, 6)
        model = small_cnn(pretrained=table, epochs=0)
        model.fit(x, rng.integers(0, 2, 6))
        assert np.array_equal(model.core_.encoder.embedding.E, table)

    def test_pretrained_dim_mismatch(self):
        rng = np.random.default_rng(8)
        bad = np.zeros((3, 4))               # vocab too small for max id 5
        x = toy_sequences(rng, 6)
        model = small_cnn(pretrained=bad, vocab_size=6, epochs=1)
        with pytest.raises(DimensionMismatch):
            model.fit(x, rng.integers(0, 2, 6))


class TestMultiTask:
    def _data(self, n=12, seed=9):
        rng = np.random.default_rng(seed)
        x = toy_sequences(rng, n)
        labels = {
            "apnea": rng.integers(0, 2, n),
            "diabetes": rng.integers(0, 3, n),
            "hypertension": rng.integers(0, 2, n),
            "insomnia": rng.integers(0, 3, n),
        }
        return x, labels

    def _model(self, **kw):
        defaults = dict(embedding_dim=4, depth=1, n_filters=4, kernel=3, pool=2,
                        dense_units=8, dropout=0.0, lambda1=0.0, lambda2=0.0,
                        lr=0.01, batch_size=8, epochs=3, seed=0, vocab_size=6)
        defaults.update(kw)
        return MultiTaskConvNet(**defaults)

    def test_predict_returns_all_tasks(self):
        x, labels = self._data()
        model = self._model().fit(x, labels)
        preds = model.predict(x)
        assert set(preds) == {"apnea", "diabetes", "hypertension", "insomnia"}
        probs = model.predict_proba(x)
        assert probs["diabetes"].shape == (12, 3)

    def test_fully_missing_task_leaves_head_at_init(self):
        x, labels = self._data()
        labels["insomnia"] = np.full(len(x), -1)
        model = self._model().fit(x, labels)
        fresh = self._model()
        fresh.fit(x, {**labels, "insomnia": np.full(len(x), -1)})
        from acton.nn.network import build_head

        init_head = build_head(model.core_.spec, "insomnia", seed=0)
        assert np.array_equal(model.core_.heads["insomnia"].W, init_head.W)
        assert np.array_equal(model.core_.heads["insomnia"].b, init_head.b)

    def test_head_isolation(self):
        """A single task's gradients touch its own head and the shared stack only."""
        x, labels = self._data(n=8)
        model = self._model(epochs=1)
        model.fit(x, labels)
        core = model.core_
        only_apnea = {
            "apnea": labels["apnea"][:8],
            "diabetes": np.full(8, -1), "hypertension": np.full(8, -1),
            "insomnia": np.full(8, -1),
        }
        _, grads = core.loss_and_grads(x, only_apnea)
        for task in ("diabetes", "hypertension", "insomnia"):
            assert np.all(grads[f"head.{task}.W"] == 0.0)
            assert np.all(grads[f"head.{task}.b"] == 0.0)
        assert np.any(grads["head.apnea.W"] != 0.0)
        assert np.any(grads["dense.W"] != 0.0)

    def test_one_hot_alpha_matches_single_task_training(self):
        rng = np.random.default_rng(10)
        x = toy_sequences(rng, 10, length=14)
        y = rng.integers(0, 2, 10)
        labels = {"apnea": y, "diabetes": rng.integers(0, 3, 10),
                  "hypertension": rng.integers(0, 2, 10),
                  "insomnia": rng.integers(0, 3, 10)}
        multi = self._model(alphas={"apnea": 1.0, "diabetes": 0.0,
                                    "hypertension": 0.0, "insomnia": 0.0},
                            epochs=4, seed=3).fit(x, labels)
        single = ConvNetClassifier(task="apnea", embedding_dim=4, depth=1,
                                   n_filters=4, kernel=3, pool=2, dense_units=8,
                                   dropout=0.0, lambda1=0.0, lambda2=0.0,
                                   lr=0.01, batch_size=8, epochs=4, seed=3,
                                   vocab_size=6).fit(x, y)
        sp, mp = single.core_.params(), multi.core_.params()
        for name in sp:
            assert np.array_equal(sp[name], mp[name]), name

    def test_alpha_sum_enforced(self):
        x, labels = self._data()
        model = self._model(alphas={"apnea": 0.5, "diabetes": 0.5,
                                    "hypertension": 0.5, "insomnia": 0.5})
        with pytest.raises(AlphaSumViolation):
            model.fit(x, labels)

    def test_no_labels_at_all_rejected(self):
        x, _ = self._data()
        empty = {t: np.full(len(x), -1) for t in
                 ("apnea", "diabetes", "hypertension", "insomnia")}
        with pytest.raises(NoLabeledSubjects):
            self._model().fit(x, empty)
