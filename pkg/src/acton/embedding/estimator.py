"""Scikit-learn style wrapper around embedding training."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .space import TrainConfig
from .train import infer_sequence, sequence_features, train_embeddings


def _sequences_of(X):
    return list(X.sequences) if hasattr(X, "sequences") else list(X)


class ActivityEmbedder(BaseEstimator, TransformerMixin):
    """Learns segment vectors on ``fit`` and emits per-subject features.

    ``fit`` expects a parsed dataset (it needs the vocabulary for the noise
    distribution); ``transform`` accepts a dataset or a plain iterable of
    encoded sequences and returns one row of concatenated segment vectors
    per subject. Training members are looked up; unseen subjects are
    embedded with ``infer_steps`` frozen-weight gradient passes.
    """

    def __init__(self, granularity: str = "day", dim: int = 100,
                 window: int | None = None, negatives: int = 5,
                 eta: float | None = None, neighbor_set_size: int = 2,
                 epochs: int = 20, lr_start: float = 0.025, lr_end: float = 1e-4,
                 convergence_tol: float = 1e-4, infer_steps: int = 50,
                 seed: int = 0, n_threads: int = 1):
        self.granularity = granularity
        self.dim = dim
        self.window = window
        self.negatives = negatives
        self.eta = eta
        self.neighbor_set_size = neighbor_set_size
        self.epochs = epochs
        self.lr_start = lr_start
        self.lr_end = lr_end
        self.convergence_tol = convergence_tol
        self.infer_steps = infer_steps
        self.seed = seed
        self.n_threads = n_threads

    def _config(self) -> TrainConfig:
        return TrainConfig(
            granularity=self.granularity, dim=self.dim, window=self.window,
            negatives=self.negatives, eta=self.eta,
            neighbor_set_size=self.neighbor_set_size, epochs=self.epochs,
            lr_start=self.lr_start, lr_end=self.lr_end,
            convergence_tol=self.convergence_tol, seed=self.seed,
            n_threads=self.n_threads,
        )

    def fit(self, X, y=None):
        self.space_, self.loss_trace_ = train_embeddings(X, self._config())
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "space_")
        space = self.space_
        rows = []
        for i, seq in enumerate(_sequences_of(X)):
            if space.granularity.level == "sample" or space.has_subject(seq.subject_id):
                rows.append(sequence_features(space, seq))
            else:
                cfg = self._config().resolve(seq.sampling_period_s)
                vectors = infer_sequence(
                    space, seq, self.infer_steps, seed=self.seed + i,
                    eta=cfg.eta, window=cfg.window, negatives=cfg.negatives,
                    lr_start=cfg.lr_start, lr_end=cfg.lr_end)
                rows.append(sequence_features(space, seq, vectors=vectors))
        return np.vstack(rows)
