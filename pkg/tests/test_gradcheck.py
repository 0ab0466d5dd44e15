"""End-to-end gradient verification through the assembled network."""

import numpy as np
import pytest

from acton.nn import Dense, NetworkSpec, gradient_check
from acton.nn.gradcheck import finite_difference_check
from acton.nn.network import ConvBlockSpec
from acton.models.convnet import _ConvNetCore


def tiny_core(l1=0.0, l2=0.25, dropout=0.0, tasks=("apnea",), seed=3):
    spec = NetworkSpec(
        vocab_size=6, embedding_dim=3, sequence_length=12,
        conv_blocks=[ConvBlockSpec(filters=4, kernel=3, pool=2, pool_stride=2)],
        dense_units=5, dropout=dropout, lambda1=l1, lambda2=l2,
        heads={t: 2 for t in tasks})
    alphas = {t: 1.0 / len(tasks) for t in tasks}
    return _ConvNetCore(spec, list(tasks), alphas, lr=1e-3, seed=seed,
                        pretrained_table=None)


class _LabelsAdapter:
    """Expose a single-task core through the (ids, golds) checker interface."""

    def __init__(self, core, task):
        self.core = core
        self.task = task

    def params(self):
        return self.core.params()

    def loss_and_grads(self, ids, golds):
        loss, grads = self.core.loss_and_grads(ids, {self.task: golds})
        return loss, grads


class TestGradientCheck:
    def test_single_dense_layer(self):
        rng = np.random.default_rng(0)
        layer = Dense(rng.normal(size=(4, 2)), rng.normal(size=2))
        x = rng.normal(size=(3, 4))
        upstream = rng.normal(size=(3, 2))

        for g in layer.grads.values():
            g.fill(0.0)
        layer.forward(x)
        layer.backward(upstream)
        loss = lambda: float(np.sum(layer.forward(x) * upstream))
        report = finite_difference_check(loss, layer.params(), layer.grads)
        assert report.max_relative_error < 1e-6

    def test_full_stack(self):
        rng = np.random.default_rng(1)
        core = tiny_core()
        ids = rng.integers(0, 6, size=(4, 12))
        golds = rng.integers(0, 2, size=4).astype(np.int64)
        report = gradient_check(_LabelsAdapter(core, "apnea"), ids, golds)
        assert report.max_relative_error < 1e-4, report.per_param

    def test_full_stack_with_l1_away_from_kink(self):
        rng = np.random.default_rng(2)
        core = tiny_core(l1=0.25)
        w = core.heads["apnea"].W
        w[np.abs(w) < 1e-3] = 1e-3           # keep FD off the |w| kink
        ids = rng.integers(0, 6, size=(4, 12))
        golds = rng.integers(0, 2, size=4).astype(np.int64)
        report = gradient_check(_LabelsAdapter(core, "apnea"), ids, golds)
        assert report.max_relative_error < 1e-4, report.per_param

    def test_multi_task_stack(self):
        rng = np.random.default_rng(3)
        core = tiny_core(tasks=("apnea", "hypertension"))
        ids = rng.integers(0, 6, size=(4, 12))
        labels = {
            "apnea": np.array([0, 1, -1, 1]),
            "hypertension": np.array([1, -1, 0, 0]),
        }
        _, analytic = core.loss_and_grads(ids, labels)
        analytic = {k: v.copy() for k, v in analytic.items()}
        report = finite_difference_check(
            lambda: core.loss_and_grads(ids, labels)[0], core.params(), analytic)
        assert report.max_relative_error < 1e-4, report.per_param

    def test_corrupted_backward_is_flagged(self):
        rng = np.random.default_rng(4)
        core = tiny_core()
        ids = rng.integers(0, 6, size=(4, 12))
        golds = rng.integers(0, 2, size=4).astype(np.int64)
        _, grads = core.loss_and_grads(ids, {"apnea": golds})
        sabotaged = {k: v.copy() for k, v in grads.items()}
        sabotaged["dense.W"] = sabotaged["dense.W"] * 1.7 + 0.05
        report = finite_difference_check(
            lambda: core.loss_and_grads(ids, {"apnea": golds})[0],
            core.params(), sabotaged)
        assert report.max_relative_error > 1e-2
        assert report.worst_param == "dense.W"
