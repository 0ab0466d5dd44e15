"""Embedding-space storage, training configuration and noise distributions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..core import Granularity
from ..exceptions import AllZeroCounts

#: Tuned context-window width per granularity level.
DEFAULT_WINDOWS = {"sample": 20, "hour": 20, "day": 30, "week": 50}

#: Tuned smoothing strength per granularity level; smoothing does not apply
#: to whole-sequence (week) vectors or to symbol-level training.
DEFAULT_ETAS = {"sample": 0.0, "hour": 0.5, "day": 0.25, "week": 0.0}

INIT_SCALE = 0.5  # initial components drawn from U(-0.5/d, +0.5/d)


@dataclass
class TrainConfig:
    """Hyperparameters for embedding training.

    ``window`` and ``eta`` default per granularity level (windows
    20/20/30/50 and eta 0/0.5/0.25/0 for sample/hour/day/week). The
    learning rate decays linearly from ``lr_start`` to ``lr_end`` over all
    scheduled updates; training stops early once the relative epoch-loss
    change falls below ``convergence_tol``.
    """

    granularity: str = "day"
    dim: int = 100
    window: int | None = None
    negatives: int = 5
    eta: float | None = None
    neighbor_set_size: int = 2
    epochs: int = 20
    lr_start: float = 0.025
    lr_end: float = 1e-4
    convergence_tol: float = 1e-4
    seed: int = 0
    n_threads: int = 1

    def resolve(self, sampling_period_s: int) -> "TrainConfig":
        """Fill level-dependent defaults and validate against the period."""
        g = Granularity.from_level(self.granularity, sampling_period_s)
        window = self.window if self.window is not None else DEFAULT_WINDOWS[g.level]
        eta = self.eta if self.eta is not None else DEFAULT_ETAS[g.level]
        if g.level in ("week", "sample"):
            eta = 0.0  # no neighboring segments to smooth against
        if window < 1:
            raise ValueError("window must be positive")
        if g.level != "sample" and window > g.samples_per_segment:
            raise ValueError(
                f"window {window} exceeds segment length {g.samples_per_segment}"
            )
        if self.neighbor_set_size not in (2, 4):
            raise ValueError("neighbor_set_size must be 2 or 4")
        if self.negatives < 1:
            raise ValueError("negatives must be positive")
        if eta < 0:
            raise ValueError("eta must be non-negative")
        return replace(self, window=window, eta=eta)


@dataclass
class NoiseTable:
    """Sampling table for a count^power noise distribution."""

    ids: np.ndarray
    probabilities: np.ndarray
    cumulative: np.ndarray = field(repr=False)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draw ids with probability proportional to count^power."""
        u = rng.random(size)
        return self.ids[np.searchsorted(self.cumulative, u, side="right")]


def build_noise_table(counts, power: float = 0.75) -> NoiseTable:
    """Normalize ``counts**power`` into a sampling distribution.

    ``counts`` may be a mapping id -> count or a dense array indexed by id.
    Zero-count ids keep probability zero and are never drawn.
    """
    if isinstance(counts, dict):
        ids = np.array(sorted(counts), dtype=np.int64)
        raw = np.array([counts[i] for i in ids], dtype=np.float64)
    else:
        raw = np.asarray(counts, dtype=np.float64)
        ids = np.arange(len(raw), dtype=np.int64)
    if raw.size == 0 or not np.any(raw > 0):
        raise AllZeroCounts("noise distribution needs at least one positive count")
    if np.any(raw < 0):
        raise ValueError("counts must be non-negative")
    weights = np.power(raw, power, where=raw > 0, out=np.zeros_like(raw))
    probabilities = weights / weights.sum()
    cumulative = np.cumsum(probabilities)
    cumulative[-1] = 1.0  # guard the final bin against rounding
    return NoiseTable(ids, probabilities, cumulative)


@dataclass
class EmbeddingSpace:
    """Trained vector tables for one corpus at one granularity.

    Segment rows are indexed by the segment's corpus-wide id; symbol rows
    by vocabulary id. Symbol-level (sample) training leaves the segment
    tables empty and stores its input vectors in ``symbol_vectors``;
    coarser granularities leave ``symbol_vectors`` empty and expose symbol
    geometry through ``symbol_out_weights``.
    """

    dim: int
    granularity: Granularity
    segment_vectors: np.ndarray
    segment_out_weights: np.ndarray
    symbol_vectors: np.ndarray
    symbol_out_weights: np.ndarray
    symbol_counts: np.ndarray
    subject_index: dict            # subject_id -> (first segment id, count)
    sampling_period_s: int

    @property
    def vocab_size(self) -> int:
        return len(self.symbol_counts)

    @property
    def n_segments(self) -> int:
        return len(self.segment_vectors)

    def has_subject(self, subject_id: str) -> bool:
        return subject_id in self.subject_index


def init_vector_table(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    """Fresh table with components drawn from U(-0.5/d, +0.5/d)."""
    bound = INIT_SCALE / dim
    return rng.uniform(-bound, bound, size=(rows, dim))


def allocate_space(rng: np.random.Generator, dim: int, granularity: Granularity,
                   n_segments: int, vocab_size: int, symbol_counts: np.ndarray,
                   subject_index: dict, sampling_period_s: int) -> EmbeddingSpace:
    """Allocate and randomly initialize all tables for a corpus.

    Draw order is fixed (segment vectors, segment output weights, symbol
    vectors, symbol output weights) so identical seeds yield identical
    initializations.
    """
    if granularity.level == "sample":
        seg_vecs = np.zeros((0, dim))
        seg_out = np.zeros((0, dim))
        sym_vecs = init_vector_table(rng, vocab_size, dim)
    else:
        seg_vecs = init_vector_table(rng, n_segments, dim)
        seg_out = init_vector_table(rng, n_segments, dim)
        sym_vecs = np.zeros((0, dim))
    sym_out = init_vector_table(rng, vocab_size, dim)
    return EmbeddingSpace(
        dim=dim,
        granularity=granularity,
        segment_vectors=seg_vecs,
        segment_out_weights=seg_out,
        symbol_vectors=sym_vecs,
        symbol_out_weights=sym_out,
        symbol_counts=np.asarray(symbol_counts, dtype=np.int64),
        subject_index=dict(subject_index),
        sampling_period_s=sampling_period_s,
    )
