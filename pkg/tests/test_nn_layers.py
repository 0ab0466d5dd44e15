"""Forward values (hand-evaluated) and backward passes (finite differences)
for every layer."""

import math

import numpy as np
import pytest

from acton.exceptions import (
    BatchTooSmall,
    IdOutOfRange,
    ShapeMismatch,
    WindowTooLarge,
)
from acton.nn import (
    AvgPool1D,
    BatchNorm,
    Conv1D,
    Dense,
    Dropout,
    EmbeddingLayer,
    adam_step,
    cross_entropy_elasticnet,
    softmax,
)
from acton.nn.gradcheck import finite_difference_check
from acton.nn.optim import AdamState


def check_layer_gradients(layer, x, tolerance, extra_params=None, forward=None):
    """FD-verify parameter gradients and the input gradient of one layer."""
    forward = forward or (lambda: layer.forward(x))
    out = forward()
    rng = np.random.default_rng(0)
    upstream = rng.normal(size=out.shape)

    for g in layer.grads.values():
        g.fill(0.0)
    dx = layer.backward(upstream)

    loss = lambda: float(np.sum(forward() * upstream))
    params = dict(layer.params())
    report = finite_difference_check(loss, params, dict(layer.grads))
    assert report.max_relative_error < tolerance, report.per_param

    if dx is not None:
        wrapped = {"x": x}
        report_x = finite_difference_check(loss, wrapped, {"x": dx})
        assert report_x.max_relative_error < tolerance


class TestEmbedding:
    def test_lookup(self):
        layer = EmbeddingLayer(np.array([[1.0, 2.0], [3.0, 4.0]]))
        out = layer.forward(np.array([[1, 0]]))
        assert out.tolist() == [[[3.0, 4.0], [1.0, 2.0]]]

    def test_backward_accumulates_repeated_ids(self):
        layer = EmbeddingLayer(np.zeros((3, 2)))
        layer.forward(np.array([[1, 1]]))
        layer.backward(np.array([[[1.0, 2.0], [10.0, 20.0]]]))
        assert layer.grads["E"][1].tolist() == [11.0, 22.0]
        assert layer.grads["E"][0].tolist() == [0.0, 0.0]

    def test_id_out_of_range(self):
        layer = EmbeddingLayer(np.zeros((3, 2)))
        with pytest.raises(IdOutOfRange):
            layer.forward(np.array([[5]]))

    def test_gradient_check(self):
        rng = np.random.default_rng(1)
        layer = EmbeddingLayer(rng.normal(size=(5, 3)))
        ids = rng.integers(0, 5, size=(2, 4))
        check_layer_gradients(layer, ids, 1e-6,
                              forward=lambda: layer.forward(ids))


class TestConv1D:
    def test_hand_evaluated_wide_convolution(self):
        # d=1, X=[1,2,3], k=2, u=[1,1], zero padding 1 -> [1,3,5,3]
        layer = Conv1D(np.ones((2, 1)), np.zeros(1), kernel=2, padding=1)
        out = layer.forward(np.array([[[1.0], [2.0], [3.0]]]))
        assert out[0, :, 0].tolist() == [1.0, 3.0, 5.0, 3.0]

    def test_zero_filters_give_zero_maps_and_zero_backward(self):
        layer = Conv1D(np.zeros((2, 1)), np.zeros(1), kernel=2)
        x = np.array([[[1.0], [2.0], [3.0]]])
        out = layer.forward(x)
        assert np.all(out == 0.0)
        dx = layer.backward(np.ones_like(out))
        assert np.all(dx == 0.0)           # ReLU gate is closed at zero

    @pytest.mark.parametrize("n,k,o", [(6, 3, 2), (5, 2, 1), (9, 4, 0), (7, 5, 4)])
    def test_output_length_formula(self, n, k, o):
        rng = np.random.default_rng(0)
        layer = Conv1D(rng.normal(size=(k * 2, 3)), np.zeros(3), kernel=k, padding=o)
        out = layer.forward(rng.normal(size=(2, n, 2)))
        assert out.shape == (2, n + 2 * o - k + 1, 3)

    def test_gradient_check(self):
        rng = np.random.default_rng(2)
        layer = Conv1D(rng.normal(size=(6, 4)) * 0.5, rng.normal(size=4) * 0.1,
                       kernel=3)
        x = rng.normal(size=(2, 5, 2))
        check_layer_gradients(layer, x, 1e-5)

    def test_shape_mismatch(self):
        layer = Conv1D(np.ones((6, 4)), np.zeros(4), kernel=3)
        with pytest.raises(ShapeMismatch):
            layer.forward(np.zeros((1, 5, 3)))


class TestAvgPool:
    def test_hand_evaluated_overlapping_windows(self):
        pool = AvgPool1D(2, stride=1)
        out = pool.forward(np.array([[[1.0], [3.0], [5.0], [3.0]]]))
        assert out[0, :, 0].tolist() == [2.0, 4.0, 4.0]

    def test_unit_window_is_identity(self):
        x = np.arange(8.0).reshape(1, 4, 2)
        assert np.array_equal(AvgPool1D(1, stride=1).forward(x), x)

    def test_global_average(self):
        x = np.arange(8.0).reshape(1, 4, 2)
        out = AvgPool1D(4).forward(x)
        assert out.shape == (1, 1, 2)
        assert np.allclose(out[0, 0], x[0].mean(axis=0))

    def test_window_too_large(self):
        with pytest.raises(WindowTooLarge):
            AvgPool1D(5).forward(np.zeros((1, 4, 2)))

    @pytest.mark.parametrize("stride", [1, 2, 3])
    def test_gradient_check(self, stride):
        rng = np.random.default_rng(3)
        pool = AvgPool1D(3, stride=stride)
        x = rng.normal(size=(2, 7, 2))
        out = pool.forward(x)
        upstream = rng.normal(size=out.shape)
        dx = pool.backward(upstream)
        loss = lambda: float(np.sum(pool.forward(x) * upstream))
        report = finite_difference_check(loss, {"x": x}, {"x": dx})
        assert report.max_relative_error < 1e-7


class TestBatchNorm:
    def test_hand_evaluated_two_point_batch(self):
        bn = BatchNorm(1)
        out = bn.forward(np.array([[1.0], [3.0]]), train=True)
        assert out[:, 0] == pytest.approx([-1.0, 1.0], abs=1e-4)

    def test_scale_zero_broadcasts_shift(self):
        bn = BatchNorm(2)
        bn.gamma[:] = 0.0
        bn.beta[:] = [5.0, -1.0]
        out = bn.forward(np.random.default_rng(0).normal(size=(4, 2)), train=True)
        assert np.allclose(out, [5.0, -1.0])

    def test_normalized_batch_statistics(self):
        rng = np.random.default_rng(4)
        bn = BatchNorm(3)
        x = rng.normal(loc=7.0, scale=3.0, size=(64, 3))
        bn.gamma[:] = 1.0
        bn.beta[:] = 0.0
        out = bn.forward(x, train=True)
        assert np.all(np.abs(out.mean(axis=0)) < 1e-9)
        assert np.allclose(out.var(axis=0), 1.0, atol=1e-5)

    def test_eval_uses_running_stats(self):
        rng = np.random.default_rng(5)
        bn = BatchNorm(2)
        for _ in range(200):
            bn.forward(rng.normal(loc=2.0, size=(32, 2)), train=True)
        out = bn.forward(np.full((4, 2), 2.0), train=False)
        assert np.all(np.abs(out) < 0.2)     # running mean has converged near 2

    def test_batch_too_small(self):
        with pytest.raises(BatchTooSmall):
            BatchNorm(2).forward(np.zeros((1, 2)), train=True)

    def test_gradient_check_train_mode(self):
        rng = np.random.default_rng(6)
        bn = BatchNorm(3)
        bn.gamma[:] = rng.normal(size=3)
        bn.beta[:] = rng.normal(size=3)
        x = rng.normal(size=(5, 3))
        check_layer_gradients(bn, x, 1e-5,
                              forward=lambda: bn.forward(x, train=True))


class TestDropout:
    def test_eval_mode_is_identity(self):
        x = np.ones((3, 3))
        assert np.array_equal(Dropout(0.5).forward(x, train=False), x)

    def test_p_zero_is_identity_in_train(self):
        x = np.ones((3, 3))
        out = Dropout(0.0).forward(x, train=True, rng=np.random.default_rng(0))
        assert np.array_equal(out, x)

    def test_empirical_drop_rate(self):
        rng = np.random.default_rng(7)
        x = np.ones((400, 500))
        out = Dropout(0.5).forward(x, train=True, rng=rng)
        frac = np.mean(out == 0.0)
        se = math.sqrt(0.25 / x.size)
        assert abs(frac - 0.5) <= 3 * se
        survivors = out[out != 0.0]
        assert np.allclose(survivors, 2.0)   # inverted scaling by 1/(1-p)

    def test_mask_reproducible_by_seed(self):
        x = np.ones((10, 10))
        a = Dropout(0.3).forward(x, train=True, rng=np.random.default_rng(42))
        b = Dropout(0.3).forward(x, train=True, rng=np.random.default_rng(42))
        assert np.array_equal(a, b)

    def test_backward_uses_same_mask(self):
        layer = Dropout(0.5)
        x = np.ones((4, 4))
        out = layer.forward(x, train=True, rng=np.random.default_rng(1))
        dx = layer.backward(np.ones_like(x))
        assert np.array_equal(dx != 0.0, out != 0.0)


class TestDense:
    def test_identity_weight_no_activation(self):
        layer = Dense(np.eye(3), np.zeros(3))
        x = np.random.default_rng(0).normal(size=(2, 3))
        assert np.allclose(layer.forward(x), x)

    def test_zero_weight(self):
        layer = Dense(np.zeros((3, 2)), np.zeros(2))
        assert np.all(layer.forward(np.ones((2, 3))) == 0.0)

    @pytest.mark.parametrize("activation", ["none", "relu"])
    def test_gradient_check(self, activation):
        rng = np.random.default_rng(8)
        layer = Dense(rng.normal(size=(4, 3)), rng.normal(size=3),
                      activation=activation)
        x = rng.normal(size=(5, 4))
        check_layer_gradients(layer, x, 1e-5)


class TestSoftmax:
    def test_uniform_on_zero_logits(self):
        out = softmax(np.zeros((2, 4)))
        assert np.allclose(out, 0.25)

    def test_shift_invariance(self):
        rng = np.random.default_rng(9)
        logits = rng.normal(size=(3, 5))
        assert np.allclose(softmax(logits), softmax(logits + 123.456), atol=1e-12)

    def test_hand_evaluated_log_ratio(self):
        out = softmax(np.array([[math.log(1.0), math.log(3.0)]]))
        assert out[0].tolist() == pytest.approx([0.25, 0.75], abs=1e-12)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(10)
        out = softmax(rng.normal(size=(50, 7)) * 30)
        assert np.all(np.abs(out.sum(axis=1) - 1.0) < 1e-12)


class TestCrossEntropyElasticNet:
    def test_perfect_prediction_zero_loss(self):
        probs = np.array([[1.0, 0.0], [0.0, 1.0]])
        res = cross_entropy_elasticnet(probs, np.array([0, 1]), np.zeros((2, 2)))
        assert res.loss == 0.0

    def test_uniform_probs_give_log_k(self):
        k = 5
        probs = np.full((3, k), 1.0 / k)
        res = cross_entropy_elasticnet(probs, np.zeros(3, dtype=int), np.zeros((2, k)))
        assert res.loss == pytest.approx(math.log(k), abs=1e-12)

    @pytest.mark.parametrize("l1", [0.0, 0.25, 1.0])
    def test_penalty_hand_evaluated(self, l1):
        # data term zero, W=[2]: 0.5*0.5*4 + l1*2
        probs = np.array([[1.0]])
        res = cross_entropy_elasticnet(probs, np.array([0]), np.array([[2.0]]),
                                       l1=l1, l2=0.5)
        assert res.loss == pytest.approx(1.0 + l1 * 2.0, abs=1e-12)

    def test_zero_probability_gold_clamps_with_flag(self):
        probs = np.array([[1.0, 0.0]])
        res = cross_entropy_elasticnet(probs, np.array([1]), np.zeros((1, 2)))
        assert res.clamped
        assert np.isfinite(res.loss)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(11)
        logits = rng.normal(size=(4, 3))
        w = rng.normal(size=(5, 3))
        w[np.abs(w) < 0.05] = 0.1            # keep L1 away from its kink
        golds = rng.integers(0, 3, size=4)

        def loss():
            return cross_entropy_elasticnet(softmax(logits), golds, w,
                                            l1=0.25, l2=0.5).loss

        res = cross_entropy_elasticnet(softmax(logits), golds, w, l1=0.25, l2=0.5)
        report = finite_difference_check(
            loss, {"logits": logits, "w": w},
            {"logits": res.grad_logits, "w": res.grad_penalty})
        assert report.max_relative_error < 1e-6


class TestAdam:
    def test_zero_gradient_is_a_fixpoint(self):
        p = np.array([1.0, -2.0])
        state = AdamState.like(p)
        for _ in range(5):
            adam_step(p, np.zeros(2), state, lr=0.1)
        assert p.tolist() == [1.0, -2.0]

    def test_first_step_hand_evaluated(self):
        # g=1: corrected moments are exactly 1, so the step is -lr/(1+eps)
        p = np.array([0.0])
        state = AdamState.like(p)
        adam_step(p, np.array([1.0]), state, lr=0.001)
        expected = -0.001 * 1.0 / (1.0 + 1e-8)
        assert p[0] == pytest.approx(expected, abs=1e-18)
        assert p[0] == pytest.approx(-0.001, abs=1e-8)

    def test_identical_trajectories(self):
        rng = np.random.default_rng(12)
        grads = [rng.normal(size=3) for _ in range(10)]
        p1, p2 = np.zeros(3), np.zeros(3)
        s1, s2 = AdamState.like(p1), AdamState.like(p2)
        for g in grads:
            adam_step(p1, g, s1, lr=0.01)
            adam_step(p2, g, s2, lr=0.01)
        assert np.array_equal(p1, p2)

    def test_shape_mismatch(self):
        p = np.zeros(3)
        with pytest.raises(ShapeMismatch):
            adam_step(p, np.zeros(4), AdamState.like(p))
