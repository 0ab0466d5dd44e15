"""Domain types shared by every other module.

Activity recordings are sequences of discrete activity counts sampled at a
fixed period (30 s by default). Counts are mapped to dense symbol ids by a
:class:`Vocabulary`; sequences are cut into equal-length segments by a
:class:`Granularity`; concatenating per-segment vectors yields the feature
vector for a whole sequence.

All types here are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, EmptyInput, IndivisibleLength

#: One-second span of each granularity level; "sample" is special-cased to a
#: single device sample regardless of the sampling period.
GRANULARITY_SECONDS = {"hour": 3600, "day": 86400, "week": 604800}

GRANULARITY_LEVELS = ("sample", "hour", "day", "week")

#: Prediction tasks, in file/column order, with their class counts.
TASK_NAMES = ("apnea", "diabetes", "hypertension", "insomnia")
TASK_CLASSES = {"apnea": 2, "diabetes": 3, "hypertension": 2, "insomnia": 3}

DEFAULT_SAMPLING_PERIOD_S = 30
DEFAULT_SEQUENCE_DAYS = 7


@dataclass(frozen=True)
class Granularity:
    """A segmentation unit: its level name and length in samples."""

    level: str
    samples_per_segment: int

    def __post_init__(self):
        if self.level not in GRANULARITY_LEVELS:
            raise ValueError(f"unknown granularity level {self.level!r}")
        if self.samples_per_segment < 1:
            raise ValueError("samples_per_segment must be positive")

    @classmethod
    def from_level(cls, level: str, sampling_period_s: int = DEFAULT_SAMPLING_PERIOD_S) -> "Granularity":
        """Derive the segment length from the level and sampling period."""
        if level == "sample":
            return cls("sample", 1)
        if level not in GRANULARITY_SECONDS:
            raise ValueError(f"unknown granularity level {level!r}")
        span = GRANULARITY_SECONDS[level]
        if span % sampling_period_s != 0:
            raise ValueError(
                f"sampling period {sampling_period_s}s does not divide the {level} span"
            )
        return cls(level, span // sampling_period_s)


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between raw activity counts and dense symbol ids.

    Ids are contiguous integers ``0..V-1``. Observed raw values occupy ids
    ``0..V-2`` in ascending numeric order; the reserved UNK id is last and
    absorbs missing entries and, at encode time, unseen raw values.
    """

    raw_values: np.ndarray          # ascending raw counts for ids 0..V-2
    counts: np.ndarray              # per-id occurrence totals, UNK included
    _raw_to_id: dict = field(repr=False)

    def __post_init__(self):
        self.raw_values.flags.writeable = False
        self.counts.flags.writeable = False

    @classmethod
    def from_counts(cls, raw_counts: dict, missing_count: int = 0) -> "Vocabulary":
        """Build from a raw-value -> occurrence-count mapping."""
        if not raw_counts and missing_count == 0:
            raise EmptyInput("cannot build a vocabulary from an empty corpus")
        raws = np.array(sorted(raw_counts), dtype=np.int64)
        counts = np.empty(len(raws) + 1, dtype=np.int64)
        counts[: len(raws)] = [raw_counts[r] for r in raws]
        counts[-1] = missing_count
        return cls(raws, counts, {int(r): i for i, r in enumerate(raws)})

    @property
    def size(self) -> int:
        return len(self.counts)

    @property
    def unk_id(self) -> int:
        return self.size - 1

    def __contains__(self, raw: int) -> bool:
        return raw in self._raw_to_id

    def encode(self, raw) -> int:
        """Map a raw count to its symbol id; missing/unseen map to UNK."""
        if raw is None:
            return self.unk_id
        return self._raw_to_id.get(int(raw), self.unk_id)

    def decode(self, symbol_id: int):
        """Inverse of :meth:`encode`; UNK decodes to ``None``."""
        if symbol_id == self.unk_id:
            return None
        return int(self.raw_values[symbol_id])

    def encode_array(self, raw: np.ndarray) -> np.ndarray:
        """Vectorized encode; entries < 0 are treated as missing."""
        raw = np.asarray(raw, dtype=np.int64)
        if len(self.raw_values) == 0:
            return np.full(raw.shape, self.unk_id, dtype=np.int32)
        idx = np.searchsorted(self.raw_values, raw)
        idx = np.clip(idx, 0, len(self.raw_values) - 1)
        hit = (self.raw_values[idx] == raw) & (raw >= 0)
        return np.where(hit, idx, self.unk_id).astype(np.int32)


@dataclass(frozen=True)
class ActivitySequence:
    """One subject's encoded activity recording."""

    subject_id: str
    symbols: np.ndarray             # int32 symbol ids, length n
    sampling_period_s: int = DEFAULT_SAMPLING_PERIOD_S

    def __post_init__(self):
        object.__setattr__(self, "symbols", np.ascontiguousarray(self.symbols, dtype=np.int32))
        self.symbols.flags.writeable = False
        if len(self.symbols) == 0:
            raise EmptyInput(f"subject {self.subject_id!r} has an empty sequence")

    def __len__(self) -> int:
        return len(self.symbols)


@dataclass(frozen=True)
class TimeSegment:
    """One granularity-sized slice of a subject's sequence.

    ``global_id`` is unique across the corpus and assigned contiguously in
    (subject order, temporal order), so a corpus's segments index a dense
    table directly.
    """

    global_id: int
    subject_id: str
    index_in_sequence: int
    start: int
    stop: int                       # half-open [start, stop)

    def __len__(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class LabelRecord:
    """Per-subject disorder labels; ``None`` marks a missing label."""

    subject_id: str
    apnea: int | None = None
    diabetes: int | None = None
    hypertension: int | None = None
    insomnia: int | None = None

    def get(self, task: str):
        return getattr(self, task)

    def tasks_present(self) -> tuple:
        return tuple(t for t in TASK_NAMES if self.get(t) is not None)


def segment_sequence(seq: ActivitySequence, granularity: Granularity,
                     first_global_id: int = 0) -> list[TimeSegment]:
    """Tile a sequence into consecutive equal-length segments.

    Global ids start at ``first_global_id`` and increase in temporal order.
    """
    length = granularity.samples_per_segment
    n = len(seq)
    if n % length != 0:
        raise IndivisibleLength(
            f"sequence length {n} is not a multiple of segment length {length} "
            f"({granularity.level})"
        )
    return [
        TimeSegment(first_global_id + i, seq.subject_id, i, i * length, (i + 1) * length)
        for i in range(n // length)
    ]


def segment_corpus(sequences, granularity: Granularity) -> list[list[TimeSegment]]:
    """Segment every sequence, assigning global ids contiguously in file order."""
    out = []
    next_id = 0
    for seq in sequences:
        segs = segment_sequence(seq, granularity, first_global_id=next_id)
        out.append(segs)
        next_id += len(segs)
    return out


def concat_features(segment_vectors) -> np.ndarray:
    """Concatenate per-segment vectors (temporal order) into one feature vector."""
    vectors = [np.asarray(v, dtype=np.float64) for v in segment_vectors]
    if not vectors:
        raise EmptyInput("no segment vectors to concatenate")
    dim = vectors[0].shape
    for v in vectors[1:]:
        if v.shape != dim:
            raise DimensionMismatch(
                f"segment vectors disagree on dimension: {dim} vs {v.shape}"
            )
    return np.concatenate(vectors)
