"""Convolutional disorder classifiers: task-specific and shared multi-task.

Both models run symbol sequences through a shared encoder (embedding
lookup, conv+ReLU / average-pool / batch-norm blocks, dense layer,
dropout) and per-task softmax heads; the multi-task variant trains all
heads jointly against a mixture-weighted sum of the per-task losses, with
missing labels masked out per batch and the mixture mass renormalized over
the tasks actually present in that batch.

Training is deterministic under a seed: every parameter tensor draws its
initialization from a substream keyed by its name, and every epoch's
shuffling/dropout use a substream keyed by (seed, epoch), so resuming from
a checkpoint at an epoch boundary replays exactly the straight-through
run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..core import TASK_CLASSES
from ..exceptions import (
    AlphaSumViolation,
    DimensionMismatch,
    NoLabeledSubjects,
    NumericError,
)
from .._validation import as_symbol_matrix, labels_with_missing
from ..nn.layers import softmax
from ..nn.losses import cross_entropy_elasticnet
from ..nn.network import ConvBlockSpec, NetworkSpec, SharedEncoder, build_head
from ..nn.optim import Adam

#: Convolution-block depth used per task when none is given.
DEFAULT_DEPTHS = {"apnea": 3, "diabetes": 4, "insomnia": 3, "hypertension": 3,
                  "multitask": 3}

#: Mixture-weight presets (randomly initialized / pretrained embeddings).
MULTITASK_ALPHAS = {"apnea": 0.2, "diabetes": 0.2, "insomnia": 0.4,
                    "hypertension": 0.2}

def _normalized(weights: dict) -> dict:
    total = sum(weights.values())
    return {k: v / total for k, v in weights.items()}

# published pretrained weights sum to 1.05; rescaled to satisfy the
# sum-to-one constraint while keeping the relative task emphasis
MULTITASK_ALPHAS_PRETRAINED = _normalized(
    {"apnea": 0.3, "diabetes": 0.25, "insomnia": 0.35, "hypertension": 0.15})

ALPHA_TOL = 1e-9


@dataclass(frozen=True)
class TaskSpec:
    name: str
    n_classes: int

    @classmethod
    def named(cls, name: str) -> "TaskSpec":
        return cls(name, TASK_CLASSES[name])


def multitask_loss(task_losses: dict, alphas: dict) -> float:
    """Mixture of per-task losses; ``None`` marks a task absent this batch.

    Absent tasks contribute zero and their mixture mass is renormalized
    over the present ones.
    """
    if set(task_losses) != set(alphas):
        raise AlphaSumViolation("task losses and mixture weights disagree on tasks")
    total_alpha = sum(alphas.values())
    if abs(total_alpha - 1.0) > ALPHA_TOL:
        raise AlphaSumViolation(f"mixture weights sum to {total_alpha!r}, expected 1")
    present = {m: l for m, l in task_losses.items() if l is not None}
    if not present:
        return 0.0
    mass = sum(alphas[m] for m in present)
    if mass <= 0.0:
        return 0.0
    return sum(alphas[m] / mass * l for m, l in present.items())


def _pretrained_table(pretrained) -> np.ndarray | None:
    if pretrained is None:
        return None
    table = getattr(pretrained, "symbol_vectors", pretrained)
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2 or len(table) == 0:
        raise DimensionMismatch("pretrained embeddings must be a non-empty 2-D table")
    return table


class _ConvNetCore:
    """Encoder + heads + one optimizer; shared by both public estimators."""

    def __init__(self, spec: NetworkSpec, tasks, alphas: dict, lr: float,
                 seed: int, pretrained_table: np.ndarray | None):
        self.spec = spec
        self.tasks = list(tasks)
        self.alphas = dict(alphas)
        self.seed = seed
        self.encoder = SharedEncoder(spec, seed, pretrained_embedding=pretrained_table)
        self.heads = {m: build_head(spec, m, seed) for m in self.tasks}
        self.optimizer = Adam(lr=lr)
        self.epochs_done = 0
        self.loss_trace = []

    # -- parameters --------------------------------------------------------

    def params(self) -> dict:
        out = dict(self.encoder.params())
        for m, head in self.heads.items():
            for p, arr in head.params().items():
                out[f"head.{m}.{p}"] = arr
        return out

    def grads(self) -> dict:
        out = dict(self.encoder.grads())
        for m, head in self.heads.items():
            for p, arr in head.grads.items():
                out[f"head.{m}.{p}"] = arr
        return out

    def zero_grads(self) -> None:
        self.encoder.zero_grads()
        for head in self.heads.values():
            for g in head.grads.values():
                g.fill(0.0)

    # -- computation ---------------------------------------------------------

    def forward_probs(self, ids: np.ndarray, train: bool = False,
                      rng: np.random.Generator | None = None) -> dict:
        z = self.encoder.forward(ids, train=train, rng=rng)
        return {m: softmax(self.heads[m].forward(z)) for m in self.tasks}

    def loss_and_grads(self, ids: np.ndarray, labels: dict,
                       rng: np.random.Generator | None = None) -> tuple:
        """Masked mixture loss + gradients for one batch (labels use -1
        for missing); gradients land in ``self.grads()``."""
        self.zero_grads()
        z = self.encoder.forward(ids, train=True, rng=rng)
        batch = len(ids)
        task_losses: dict = {}
        dz = np.zeros_like(z)
        head_dlogits = {}
        for m in self.tasks:
            if self.alphas.get(m, 0.0) <= 0.0:
                continue
            y = labels[m]
            labeled = np.flatnonzero(y >= 0)
            if len(labeled) == 0:
                task_losses[m] = None
                continue
            logits = self.heads[m].forward(z)
            probs = softmax(logits[labeled])
            result = cross_entropy_elasticnet(
                probs, y[labeled], self.heads[m].W,
                l1=self.spec.lambda1, l2=self.spec.lambda2)
            task_losses[m] = result.loss
            full = np.zeros((batch, logits.shape[1]))
            full[labeled] = result.grad_logits
            head_dlogits[m] = (full, result.grad_penalty)

        present = [m for m in head_dlogits]
        if not present:
            return 0.0, self.grads()
        mass = sum(self.alphas[m] for m in present)
        for m in present:
            weight = self.alphas[m] / mass
            full, penalty = head_dlogits[m]
            dz += self.heads[m].backward(weight * full)
            self.heads[m].grads["W"] += weight * penalty
            # backward already accumulated the data term at weighted scale
        self.encoder.backward(dz)
        loss = multitask_loss(
            {m: task_losses.get(m) for m in self.alphas},
            self.alphas)
        return loss, self.grads()

    def run_epochs(self, ids: np.ndarray, labels: dict, n_epochs: int,
                   batch_size: int) -> None:
        n = len(ids)
        for _ in range(n_epochs):
            key = np.random.SeedSequence(entropy=self.seed,
                                         spawn_key=(3, self.epochs_done))
            rng = np.random.Generator(np.random.PCG64(key))
            order = rng.permutation(n)
            epoch_loss = 0.0
            n_batches = 0
            for start in range(0, n, batch_size):
                idx = order[start:start + batch_size]
                batch_labels = {m: labels[m][idx] for m in labels}
                loss, grads = self.loss_and_grads(ids[idx], batch_labels, rng=rng)
                if not np.isfinite(loss):
                    raise NumericError(f"non-finite loss in epoch {self.epochs_done}")
                self.optimizer.step(self.params(), grads)
                epoch_loss += loss
                n_batches += 1
            self.loss_trace.append(epoch_loss / max(n_batches, 1))
            self.epochs_done += 1


def _build_spec(vocab_size: int, embedding_dim: int, seq_len: int, tasks, *,
                depth, n_filters, kernel, pool, pool_stride, dense_units,
                dropout, lambda1, lambda2) -> NetworkSpec:
    blocks = [ConvBlockSpec(filters=n_filters, kernel=kernel, pool=pool,
                            pool_stride=pool_stride) for _ in range(depth)]
    return NetworkSpec(
        vocab_size=vocab_size, embedding_dim=embedding_dim,
        sequence_length=seq_len, conv_blocks=blocks, dense_units=dense_units,
        dropout=dropout, lambda1=lambda1, lambda2=lambda2,
        heads={m: TASK_CLASSES[m] for m in tasks})


class ConvNetClassifier(BaseEstimator, ClassifierMixin):
    """Task-specific CNN over symbol sequences.

    ``pretrained`` accepts a symbol-level embedding space (or a bare
    table); its vectors seed the lookup layer bit-exactly and fix the
    embedding dimension.
    """

    def __init__(self, task: str = "apnea", embedding_dim: int = 16,
                 depth: int | None = None, n_filters: int = 64, kernel: int = 5,
                 pool: int = 4, pool_stride: int | None = None,
                 dense_units: int = 64, dropout: float = 0.5,
                 lambda1: float = 0.25, lambda2: float = 0.25, lr: float = 1e-3,
                 batch_size: int = 32, epochs: int = 50, seed: int = 0,
                 vocab_size: int | None = None, pretrained=None):
        self.task = task
        self.embedding_dim = embedding_dim
        self.depth = depth
        self.n_filters = n_filters
        self.kernel = kernel
        self.pool = pool
        self.pool_stride = pool_stride
        self.dense_units = dense_units
        self.dropout = dropout
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.vocab_size = vocab_size
        self.pretrained = pretrained

    def _make_core(self, ids: np.ndarray) -> _ConvNetCore:
        table = _pretrained_table(self.pretrained)
        vocab_size = self.vocab_size
        if vocab_size is None:
            vocab_size = len(table) if table is not None else int(ids.max()) + 1
        dim = table.shape[1] if table is not None else self.embedding_dim
        depth = self.depth if self.depth is not None else DEFAULT_DEPTHS.get(self.task, 3)
        spec = _build_spec(
            vocab_size, dim, ids.shape[1], [self.task], depth=depth,
            n_filters=self.n_filters, kernel=self.kernel, pool=self.pool,
            pool_stride=self.pool_stride, dense_units=self.dense_units,
            dropout=self.dropout, lambda1=self.lambda1, lambda2=self.lambda2)
        return _ConvNetCore(spec, [self.task], {self.task: 1.0}, self.lr,
                            self.seed, table)

    def fit(self, X, y):
        ids = as_symbol_matrix(X)
        labels = labels_with_missing(y, len(ids))
        keep = labels >= 0
        if not np.any(keep):
            raise NoLabeledSubjects(f"no labels for task {self.task!r}")
        ids, labels = ids[keep], labels[keep]
        self.core_ = self._make_core(ids)
        self.classes_ = np.arange(TASK_CLASSES[self.task])
        self.core_.run_epochs(ids, {self.task: labels}, self.epochs, self.batch_size)
        self.loss_trace_ = self.core_.loss_trace
        return self

    def train_more(self, X, y, epochs: int):
        """Continue training in place (used for checkpoint resume)."""
        check_is_fitted(self, "core_")
        ids = as_symbol_matrix(X)
        labels = labels_with_missing(y, len(ids))
        keep = labels >= 0
        self.core_.run_epochs(ids[keep], {self.task: labels[keep]}, epochs,
                              self.batch_size)
        self.loss_trace_ = self.core_.loss_trace
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "core_")
        ids = as_symbol_matrix(X)
        return self.core_.forward_probs(ids, train=False)[self.task]

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


class MultiTaskConvNet(BaseEstimator):
    """Shared-encoder CNN with one softmax head per task.

    ``fit`` takes a mapping task -> labels (use -1 or None for missing).
    Batches renormalize the mixture weights over the tasks labeled in that
    batch; a task with no labels anywhere leaves its head untouched.
    """

    def __init__(self, tasks=("apnea", "diabetes", "hypertension", "insomnia"),
                 alphas: dict | None = None, embedding_dim: int = 16,
                 depth: int = 3, n_filters: int = 64, kernel: int = 5,
                 pool: int = 4, pool_stride: int | None = None,
                 dense_units: int = 64, dropout: float = 0.5,
                 lambda1: float = 0.25, lambda2: float = 0.25, lr: float = 1e-3,
                 batch_size: int = 32, epochs: int = 50, seed: int = 0,
                 vocab_size: int | None = None, pretrained=None):
        self.tasks = tasks
        self.alphas = alphas
        self.embedding_dim = embedding_dim
        self.depth = depth
        self.n_filters = n_filters
        self.kernel = kernel
        self.pool = pool
        self.pool_stride = pool_stride
        self.dense_units = dense_units
        self.dropout = dropout
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.vocab_size = vocab_size
        self.pretrained = pretrained

    def _resolved_alphas(self) -> dict:
        tasks = list(self.tasks)
        if self.alphas is None:
            alphas = {m: 1.0 / len(tasks) for m in tasks}
        else:
            alphas = {m: float(self.alphas[m]) for m in tasks}
        total = sum(alphas.values())
        if abs(total - 1.0) > ALPHA_TOL:
            raise AlphaSumViolation(f"mixture weights sum to {total!r}, expected 1")
        return alphas

    def _label_matrix(self, Y, n: int) -> dict:
        return {m: labels_with_missing(Y.get(m, [None] * n), n) for m in self.tasks}

    def fit(self, X, Y):
        ids = as_symbol_matrix(X)
        labels = self._label_matrix(Y, len(ids))
        if not any((labels[m] >= 0).any() for m in self.tasks):
            raise NoLabeledSubjects("no task has any labeled subject")
        table = _pretrained_table(self.pretrained)
        vocab_size = self.vocab_size
        if vocab_size is None:
            vocab_size = len(table) if table is not None else int(ids.max()) + 1
        dim = table.shape[1] if table is not None else self.embedding_dim
        spec = _build_spec(
            vocab_size, dim, ids.shape[1], list(self.tasks), depth=self.depth,
            n_filters=self.n_filters, kernel=self.kernel, pool=self.pool,
            pool_stride=self.pool_stride, dense_units=self.dense_units,
            dropout=self.dropout, lambda1=self.lambda1, lambda2=self.lambda2)
        self.core_ = _ConvNetCore(spec, list(self.tasks), self._resolved_alphas(),
                                  self.lr, self.seed, table)
        self.core_.run_epochs(ids, labels, self.epochs, self.batch_size)
        self.loss_trace_ = self.core_.loss_trace
        return self

    def train_more(self, X, Y, epochs: int):
        check_is_fitted(self, "core_")
        ids = as_symbol_matrix(X)
        labels = self._label_matrix(Y, len(ids))
        self.core_.run_epochs(ids, labels, epochs, self.batch_size)
        self.loss_trace_ = self.core_.loss_trace
        return self

    def predict_proba(self, X) -> dict:
        check_is_fitted(self, "core_")
        return self.core_.forward_probs(as_symbol_matrix(X), train=False)

    def predict(self, X) -> dict:
        return {m: np.argmax(p, axis=1) for m, p in self.predict_proba(X).items()}
