"""Parsing of activity/label CSV files and vocabulary construction.

File formats (UTF-8, LF):

* Activity CSV — header ``subject_id,timestamp_index,activity_count``;
  ``timestamp_index`` is the 0-based sampling slot, ``activity_count`` a
  non-negative integer or the literal ``NA`` for a missing reading.
* Labels CSV — header ``subject_id,apnea,diabetes,hypertension,insomnia``;
  integer class labels with ``-1`` meaning missing.

Rows absent from ``[0, n)`` and ``NA`` readings both become the UNK symbol
after encoding.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    DEFAULT_SAMPLING_PERIOD_S,
    TASK_CLASSES,
    TASK_NAMES,
    ActivitySequence,
    LabelRecord,
    Vocabulary,
)
from .exceptions import (
    DuplicateTimestamp,
    EmptyInput,
    MalformedRow,
    NoSymbolVectors,
    OutOfRangeClass,
    UnknownTaskColumn,
)

ACTIVITY_HEADER = ("subject_id", "timestamp_index", "activity_count")
LABELS_HEADER = ("subject_id",) + TASK_NAMES

#: Fraction of UNK symbols above which a subject is flagged as high-missing.
HIGH_MISSING_THRESHOLD = 0.10


@dataclass(frozen=True)
class Provenance:
    sources: tuple = ()
    digest: str = ""


@dataclass(frozen=True)
class Dataset:
    """A parsed corpus: encoded sequences, their vocabulary, optional labels."""

    sequences: tuple
    vocab: Vocabulary
    labels: dict | None = None
    provenance: Provenance = Provenance()

    def __post_init__(self):
        ids = [s.subject_id for s in self.sequences]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate subject_id among sequences")
        if self.labels:
            known = set(ids)
            for sid in self.labels:
                if sid not in known:
                    raise ValueError(f"labeled subject {sid!r} has no sequence")

    @property
    def subject_ids(self) -> tuple:
        return tuple(s.subject_id for s in self.sequences)

    def sequence(self, subject_id: str) -> ActivitySequence:
        for s in self.sequences:
            if s.subject_id == subject_id:
                return s
        raise KeyError(subject_id)

    def raw_array(self, seq: ActivitySequence) -> np.ndarray:
        """Decode a sequence back to raw counts; missing/UNK becomes -1."""
        unk = self.vocab.unk_id
        raws = np.concatenate([self.vocab.raw_values, [-1]])
        out = raws[np.where(seq.symbols == unk, len(self.vocab.raw_values), seq.symbols)]
        return out.astype(np.int64)

    def with_labels(self, labels: dict) -> "Dataset":
        return replace(self, labels=dict(labels))


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _as_lines(stream) -> list[str]:
    if isinstance(stream, str):
        return stream.splitlines()
    if isinstance(stream, io.TextIOBase):
        return stream.read().splitlines()
    return [line.rstrip("\n") for line in stream]


def parse_activity_csv(stream, sequence_length: int | None = None,
                       sampling_period_s: int = DEFAULT_SAMPLING_PERIOD_S,
                       source: str = "<memory>") -> Dataset:
    """Parse an activity CSV into a :class:`Dataset` (sequences only).

    ``sequence_length`` fixes n for every subject (rows beyond it are
    dropped, shorter recordings are padded with UNK); when omitted, n is
    the largest timestamp_index in the file plus one, shared by all
    subjects so the corpus stays rectangular.
    """
    lines = _as_lines(stream)
    if not lines:
        raise EmptyInput("activity CSV is empty")
    header = tuple(h.strip() for h in lines[0].split(","))
    if header != ACTIVITY_HEADER:
        raise MalformedRow(f"line 1: expected header {','.join(ACTIVITY_HEADER)!r}")

    per_subject: dict[str, dict[int, int]] = {}
    max_index = -1
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise MalformedRow(f"line {lineno}: expected 3 fields, got {len(row)}")
        sid, idx_s, val_s = (f.strip() for f in row)
        try:
            idx = int(idx_s)
        except ValueError:
            raise MalformedRow(f"line {lineno}: timestamp_index {idx_s!r} is not an integer") from None
        if idx < 0:
            raise MalformedRow(f"line {lineno}: negative timestamp_index {idx}")
        if val_s == "NA":
            val = -1
        else:
            try:
                val = int(val_s)
            except ValueError:
                raise MalformedRow(f"line {lineno}: activity_count {val_s!r} is not an integer or NA") from None
            if val < 0:
                raise MalformedRow(f"line {lineno}: negative activity_count {val}")
        slots = per_subject.setdefault(sid, {})
        if idx in slots:
            raise DuplicateTimestamp(f"line {lineno}: duplicate timestamp {idx} for subject {sid!r}")
        slots[idx] = val
        max_index = max(max_index, idx)

    if not per_subject:
        raise EmptyInput("activity CSV contains no data rows")
    n = sequence_length if sequence_length is not None else max_index + 1

    raw_by_subject = {}
    for sid, slots in per_subject.items():           # file order preserved
        values = np.full(n, -1, dtype=np.int64)
        for idx, val in slots.items():
            if idx < n:
                values[idx] = val
        raw_by_subject[sid] = values

    vocab = _vocab_from_raw(raw_by_subject.values())
    sequences = tuple(
        ActivitySequence(sid, vocab.encode_array(values), sampling_period_s)
        for sid, values in raw_by_subject.items()
    )
    text = "\n".join(lines)
    return Dataset(sequences, vocab, provenance=Provenance((source,), _digest(text)))


def _vocab_from_raw(raw_arrays) -> Vocabulary:
    counts: dict[int, int] = {}
    missing = 0
    for values in raw_arrays:
        present = values[values >= 0]
        missing += int(len(values) - len(present))
        uniq, cnt = np.unique(present, return_counts=True)
        for r, c in zip(uniq, cnt):
            counts[int(r)] = counts.get(int(r), 0) + int(c)
    return Vocabulary.from_counts(counts, missing_count=missing)


def build_vocabulary(dataset: Dataset) -> Vocabulary:
    """Recount the dataset's vocabulary from its decoded raw values."""
    if not dataset.sequences:
        raise EmptyInput("dataset has no sequences")
    return _vocab_from_raw(dataset.raw_array(s) for s in dataset.sequences)


def parse_labels_csv(stream) -> dict:
    """Parse a labels CSV into a subject_id -> :class:`LabelRecord` table."""
    lines = _as_lines(stream)
    if not lines:
        raise EmptyInput("labels CSV is empty")
    header = tuple(h.strip() for h in lines[0].split(","))
    if header[0] != "subject_id":
        raise UnknownTaskColumn("first column must be subject_id")
    for col in header[1:]:
        if col not in TASK_NAMES:
            raise UnknownTaskColumn(f"unknown task column {col!r}")
    if len(set(header)) != len(header):
        raise UnknownTaskColumn("duplicate column in labels header")

    table: dict[str, LabelRecord] = {}
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise MalformedRow(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        sid = row[0].strip()
        values = {}
        for col, cell in zip(header[1:], row[1:]):
            try:
                v = int(cell.strip())
            except ValueError:
                raise MalformedRow(f"line {lineno}: label {cell!r} is not an integer") from None
            if v == -1:
                values[col] = None
            elif 0 <= v < TASK_CLASSES[col]:
                values[col] = v
            else:
                raise OutOfRangeClass(
                    f"line {lineno}: {col}={v} outside 0..{TASK_CLASSES[col] - 1}"
                )
        table[sid] = LabelRecord(sid, **values)
    return table


def merge_datasets(datasets) -> Dataset:
    """Merge corpora under one union vocabulary, subjects sorted by id.

    Used to pool labeled and unlabeled collections before embedding
    training; the merge is deterministic regardless of input order.
    """
    datasets = list(datasets)
    if not datasets:
        raise EmptyInput("nothing to merge")
    raw = {}
    period = datasets[0].sequences[0].sampling_period_s
    for ds in datasets:
        for seq in ds.sequences:
            if seq.subject_id in raw:
                raise ValueError(f"duplicate subject {seq.subject_id!r} across datasets")
            raw[seq.subject_id] = ds.raw_array(seq)
    vocab = _vocab_from_raw(raw.values())
    sequences = tuple(
        ActivitySequence(sid, vocab.encode_array(raw[sid]), period)
        for sid in sorted(raw)
    )
    labels = {}
    for ds in datasets:
        if ds.labels:
            labels.update(ds.labels)
    sources = tuple(s for ds in datasets for s in ds.provenance.sources)
    digest = _digest("|".join(ds.provenance.digest for ds in datasets))
    return Dataset(sequences, vocab, labels=labels or None,
                   provenance=Provenance(sources, digest))


def reencode(dataset: Dataset, vocab: Vocabulary) -> Dataset:
    """Re-encode a dataset under a foreign vocabulary (unseen raws -> UNK)."""
    sequences = tuple(
        ActivitySequence(s.subject_id, vocab.encode_array(dataset.raw_array(s)),
                         s.sampling_period_s)
        for s in dataset.sequences
    )
    return replace(dataset, sequences=sequences, vocab=vocab)


def high_missing_subjects(dataset: Dataset, threshold: float = HIGH_MISSING_THRESHOLD) -> list:
    """Subjects whose UNK fraction exceeds ``threshold`` (flagged, not dropped)."""
    unk = dataset.vocab.unk_id
    flagged = []
    for seq in dataset.sequences:
        frac = float(np.mean(seq.symbols == unk))
        if frac > threshold:
            flagged.append((seq.subject_id, frac))
    return flagged


def resolve_oov(vocab: Vocabulary, space, raw: int) -> np.ndarray:
    """Vector for an out-of-vocabulary raw count.

    Averages the vectors of the numerically nearest in-vocabulary raw
    values: the one below and the one above where both exist, else the
    single available neighbor. Symbol vectors are preferred; coarser
    granularities fall back to the symbol output-weight table.
    """
    if raw in vocab:
        raise ValueError(f"raw value {raw} is in-vocabulary; nothing to resolve")
    table = getattr(space, "symbol_vectors", None)
    if table is None or len(table) == 0:
        table = getattr(space, "symbol_out_weights", None)
    if table is None or len(table) == 0:
        raise NoSymbolVectors("embedding space has no symbol-level table")
    raws = vocab.raw_values
    if len(raws) == 0:
        raise EmptyInput("vocabulary has no in-vocabulary raw values")
    pos = int(np.searchsorted(raws, raw))
    neighbor_ids = []
    if pos > 0:
        neighbor_ids.append(pos - 1)
    if pos < len(raws):
        neighbor_ids.append(pos)
    return np.mean([table[i] for i in neighbor_ids], axis=0)
