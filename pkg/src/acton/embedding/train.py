"""SGD training over a segmented corpus, held-out inference, features.

Training walks the corpus epoch by epoch: sequences are visited in a
seeded random order; within each segment, one target symbol is sampled
uniformly from every non-overlapping window of ``window`` symbols, and for
each target three successive gradient steps are taken — the segment/symbol
prediction step, the neighbor prediction step on one sampled adjacent
segment, and the smoothing pull toward all adjacent segments. Hour and day
segmentations use all three; whole-sequence (week) training uses only the
symbol prediction step; symbol-level (sample) training degenerates to a
skip-gram over symbols with sampled context positions.

All randomness derives from per-(epoch, sequence) substreams of the
configured seed, so runs are bit-reproducible in deterministic mode and
optional thread parallelism replays the same draws (updates may then race;
that mode trades reproducibility for throughput).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..core import Granularity, concat_features
from ..exceptions import GranularityMismatch, NumericError, UnknownSegment
from .space import (
    DEFAULT_WINDOWS,
    EmbeddingSpace,
    NoiseTable,
    TrainConfig,
    allocate_space,
    build_noise_table,
    init_vector_table,
)


@dataclass
class EpochStats:
    """Per-epoch mean losses; unused components are exact zeros."""

    total: float
    segment: float
    neighbor: float
    smoothing: float


@dataclass
class _SeqPlan:
    """Fixed per-sequence layout reused every epoch."""

    symbols: np.ndarray
    first_segment: int          # corpus-wide id of segment 0 (unused for sample)
    n_segments: int
    window_start: np.ndarray    # absolute start of each sampling window
    window_size: np.ndarray
    target_segment: np.ndarray  # local segment index per window
    neighbors: list             # per local segment, array of neighbor global ids
    n_neighbors: np.ndarray


def _plan_sequence(seq, first_segment: int, segment_len: int, window: int,
                   neighbor_radius: int, symbol_level: bool) -> _SeqPlan:
    n = len(seq)
    if symbol_level:
        starts = np.arange(0, n, window, dtype=np.int64)
        sizes = np.minimum(starts + window, n) - starts
        return _SeqPlan(seq.symbols, first_segment, n, starts, sizes,
                        np.zeros(len(starts), dtype=np.int64), [], np.zeros(0, dtype=np.int64))
    k = n // segment_len
    per_seg = -(-segment_len // window)  # ceil; a short tail forms a last window
    local = np.repeat(np.arange(k, dtype=np.int64), per_seg)
    offs = np.tile(np.arange(per_seg, dtype=np.int64) * window, k)
    starts = local * segment_len + offs
    sizes = np.minimum(offs + window, segment_len) - offs
    neighbors = []
    for i in range(k):
        lo, hi = max(0, i - neighbor_radius), min(k, i + neighbor_radius + 1)
        ids = [j for j in range(lo, hi) if j != i]
        neighbors.append(np.array(ids, dtype=np.int64) + first_segment)
    n_nb = np.array([len(a) for a in neighbors], dtype=np.int64)
    return _SeqPlan(seq.symbols, first_segment, k, starts, sizes, local, neighbors, n_nb)


def _sgns_update(phi: np.ndarray, out_table: np.ndarray, ids: np.ndarray, lr: float) -> float:
    """One in-place negative-sampling step; ids[0] is the positive row."""
    rows = out_table[ids]
    scores = rows @ phi
    loss = float(np.logaddexp(0.0, -scores[0]) + np.logaddexp(0.0, scores[1:]).sum())
    coef = expit(scores)
    coef[0] -= 1.0
    np.subtract.at(out_table, ids, (lr * coef)[:, None] * phi)
    phi -= lr * (coef @ rows)
    return loss


def _train_sequence(space: EmbeddingSpace, plan: _SeqPlan, rng: np.random.Generator,
                    noise_sym: NoiseTable, noise_seg: NoiseTable | None,
                    negatives: int, eta: float, use_neighbor: bool,
                    lr0: float, lr_slope: float, step0: int) -> tuple:
    seg_vecs = space.segment_vectors
    seg_out = space.segment_out_weights
    sym_out = space.symbol_out_weights
    symbols = plan.symbols
    t_count = len(plan.window_start)

    positions = plan.window_start + rng.integers(0, plan.window_size)
    negs_sym = noise_sym.sample(rng, (t_count, negatives))
    use_neighbor = use_neighbor and plan.n_segments >= 2
    if use_neighbor:
        negs_seg = noise_seg.sample(rng, (t_count, negatives))
        nb_pick = rng.integers(0, plan.n_neighbors[plan.target_segment])

    ids_sym = np.empty(negatives + 1, dtype=np.int64)
    ids_seg = np.empty(negatives + 1, dtype=np.int64)
    sum_s = sum_c = sum_r = 0.0

    for t in range(t_count):
        k = plan.target_segment[t]
        lr = lr0 + lr_slope * (step0 + t)
        phi = seg_vecs[plan.first_segment + k]

        ids_sym[0] = symbols[positions[t]]
        ids_sym[1:] = negs_sym[t]
        sum_s += _sgns_update(phi, sym_out, ids_sym, lr)

        if use_neighbor:
            nbs = plan.neighbors[k]
            ids_seg[0] = nbs[nb_pick[t]]
            ids_seg[1:] = negs_seg[t]
            sum_c += _sgns_update(phi, seg_out, ids_seg, lr)

        if eta > 0.0:
            nbs = plan.neighbors[k]
            if len(nbs):
                diffs = phi - seg_vecs[nbs]
                scale = eta / len(nbs)
                sum_r += scale * float((diffs * diffs).sum())
                phi -= lr * (2.0 * scale) * diffs.sum(axis=0)

    return sum_s, sum_c, sum_r, t_count


def _train_sequence_skipgram(space: EmbeddingSpace, plan: _SeqPlan,
                             rng: np.random.Generator, noise_sym: NoiseTable,
                             negatives: int, window: int,
                             lr0: float, lr_slope: float, step0: int) -> tuple:
    """Symbol-level pass: sampled centers predict sampled context symbols."""
    sym_vecs = space.symbol_vectors
    sym_out = space.symbol_out_weights
    symbols = plan.symbols
    n = len(symbols)
    t_count = len(plan.window_start)

    centers = plan.window_start + rng.integers(0, plan.window_size)
    lo = np.maximum(0, centers - window)
    hi = np.minimum(n - 1, centers + window)
    span = hi - lo  # context candidates excluding the center itself
    draw = rng.integers(0, np.maximum(span, 1))
    contexts = lo + draw + (lo + draw >= centers)
    negs = noise_sym.sample(rng, (t_count, negatives))

    ids = np.empty(negatives + 1, dtype=np.int64)
    sum_s = 0.0
    done = 0
    for t in range(t_count):
        if span[t] == 0:
            continue  # single-symbol sequence has no context
        lr = lr0 + lr_slope * (step0 + t)
        phi = sym_vecs[symbols[centers[t]]]
        ids[0] = symbols[contexts[t]]
        ids[1:] = negs[t]
        sum_s += _sgns_update(phi, sym_out, ids, lr)
        done += 1
    return sum_s, 0.0, 0.0, max(done, 1)


def train_embeddings(dataset, cfg: TrainConfig) -> tuple:
    """Train an :class:`EmbeddingSpace` over a dataset.

    Returns the trained space and the epoch-loss trace. Training stops at
    ``cfg.epochs`` or as soon as the relative epoch-loss change drops below
    ``cfg.convergence_tol``.
    """
    sequences = list(dataset.sequences)
    if not sequences:
        raise GranularityMismatch("cannot train on an empty dataset")
    period = sequences[0].sampling_period_s
    cfg = cfg.resolve(period)
    gran = Granularity.from_level(cfg.granularity, period)
    symbol_level = gran.level == "sample"
    segment_len = gran.samples_per_segment
    radius = cfg.neighbor_set_size // 2

    plans = []
    subject_index = {}
    next_gid = 0
    for seq in sequences:
        if len(seq) % segment_len != 0:
            raise GranularityMismatch(
                f"subject {seq.subject_id!r}: length {len(seq)} not divisible by {segment_len}"
            )
        plan = _plan_sequence(seq, next_gid, segment_len, cfg.window, radius, symbol_level)
        plans.append(plan)
        subject_index[seq.subject_id] = (next_gid, plan.n_segments)
        next_gid += plan.n_segments

    vocab = dataset.vocab
    root = np.random.SeedSequence(cfg.seed)
    init_key, *epoch_keys = root.spawn(1 + cfg.epochs)

    space = allocate_space(
        np.random.Generator(np.random.PCG64(init_key)),
        cfg.dim, gran, 0 if symbol_level else next_gid, vocab.size,
        vocab.counts, subject_index, period,
    )

    noise_sym = build_noise_table(vocab.counts)
    use_neighbor = gran.level in ("hour", "day")
    noise_seg = None
    if use_neighbor and next_gid > 0:
        noise_seg = build_noise_table(np.ones(next_gid))

    steps_per_epoch = sum(len(p.window_start) for p in plans)
    total_steps = cfg.epochs * steps_per_epoch
    lr_slope = (cfg.lr_end - cfg.lr_start) / max(total_steps - 1, 1)

    trace: list[EpochStats] = []
    step = 0
    for epoch in range(cfg.epochs):
        perm_key, *seq_keys = epoch_keys[epoch].spawn(1 + len(sequences))
        order = np.random.Generator(np.random.PCG64(perm_key)).permutation(len(sequences))

        jobs = []
        offset = step
        for pos in order:
            jobs.append((int(pos), offset))
            offset += len(plans[pos].window_start)

        def run(job):
            pos, step0 = job
            rng = np.random.Generator(np.random.PCG64(seq_keys[pos]))
            if symbol_level:
                return _train_sequence_skipgram(
                    space, plans[pos], rng, noise_sym, cfg.negatives,
                    cfg.window, cfg.lr_start, lr_slope, step0)
            return _train_sequence(
                space, plans[pos], rng, noise_sym, noise_seg, cfg.negatives,
                cfg.eta, use_neighbor, cfg.lr_start, lr_slope, step0)

        if cfg.n_threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.n_threads) as pool:
                results = list(pool.map(run, jobs))
        else:
            results = [run(job) for job in jobs]

        step = offset
        sum_s = sum(r[0] for r in results)
        sum_c = sum(r[1] for r in results)
        sum_r = sum(r[2] for r in results)
        count = sum(r[3] for r in results)
        stats = EpochStats(
            total=(sum_s + sum_c + sum_r) / count,
            segment=sum_s / count,
            neighbor=sum_c / count,
            smoothing=sum_r / count,
        )
        if not np.isfinite(stats.total):
            raise NumericError(f"non-finite training loss at epoch {epoch}")
        trace.append(stats)
        if epoch > 0:
            prev = trace[-2].total
            if abs(stats.total - prev) / max(abs(prev), 1e-12) < cfg.convergence_tol:
                break
    return space, trace


def infer_sequence(space: EmbeddingSpace, seq, steps: int, seed: int = 0,
                   eta: float = 0.0, window: int | None = None, negatives: int = 5,
                   lr_start: float = 0.025, lr_end: float = 1e-4) -> np.ndarray:
    """Embed a held-out sequence against frozen output weights.

    New segment vectors are drawn from the usual uniform initialization and
    refined by ``steps`` passes of the symbol-prediction gradient (plus the
    smoothing pull when ``eta`` > 0). Symbol-level spaces need no fitting:
    the stored symbol vectors are returned directly.
    """
    gran = space.granularity
    if seq.sampling_period_s != space.sampling_period_s:
        raise GranularityMismatch(
            f"sequence sampled at {seq.sampling_period_s}s, space at {space.sampling_period_s}s"
        )
    if gran.level == "sample":
        return space.symbol_vectors[seq.symbols]
    seg_len = gran.samples_per_segment
    if len(seq) % seg_len != 0:
        raise GranularityMismatch(
            f"length {len(seq)} not divisible by segment length {seg_len}"
        )
    k = len(seq) // seg_len
    window = window or DEFAULT_WINDOWS[gran.level]
    plan = _plan_sequence(seq, 0, seg_len, window, 1, symbol_level=False)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    vectors = init_vector_table(rng, k, space.dim)
    if steps <= 0:
        return vectors

    noise_sym = build_noise_table(space.symbol_counts)
    sym_out = space.symbol_out_weights
    symbols = plan.symbols
    t_count = len(plan.window_start)
    total = steps * t_count
    lr_slope = (lr_end - lr_start) / max(total - 1, 1)
    ids = np.empty(negatives + 1, dtype=np.int64)

    step = 0
    for _ in range(steps):
        positions = plan.window_start + rng.integers(0, plan.window_size)
        negs = noise_sym.sample(rng, (t_count, negatives))
        for t in range(t_count):
            seg = plan.target_segment[t]
            lr = lr_start + lr_slope * step
            step += 1
            phi = vectors[seg]
            ids[0] = symbols[positions[t]]
            ids[1:] = negs[t]
            rows = sym_out[ids]
            scores = rows @ phi
            coef = expit(scores)
            coef[0] -= 1.0
            phi -= lr * (coef @ rows)  # output weights stay frozen
            if eta > 0.0:
                nbs = plan.neighbors[seg]
                if len(nbs):
                    diffs = phi - vectors[nbs]
                    phi -= lr * (2.0 * eta / len(nbs)) * diffs.sum(axis=0)
    if not np.all(np.isfinite(vectors)):
        raise NumericError("non-finite inferred segment vectors")
    return vectors


def sequence_features(space: EmbeddingSpace, seq, vectors: np.ndarray | None = None) -> np.ndarray:
    """Concatenate a sequence's segment vectors in temporal order.

    Uses stored vectors for training members; pass ``vectors`` (from
    :func:`infer_sequence`) for held-out sequences.
    """
    if space.granularity.level == "sample":
        return space.symbol_vectors[seq.symbols].reshape(-1)
    if vectors is not None:
        return concat_features(list(vectors))
    entry = space.subject_index.get(seq.subject_id)
    if entry is None:
        raise UnknownSegment(
            f"subject {seq.subject_id!r} is not part of this space; infer first"
        )
    start, count = entry
    seg_len = space.granularity.samples_per_segment
    if count * seg_len != len(seq):
        raise GranularityMismatch(
            f"stored segments cover {count * seg_len} samples, sequence has {len(seq)}"
        )
    return space.segment_vectors[start:start + count].reshape(-1)
