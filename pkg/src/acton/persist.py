"""Bit-exact serialization: embeddings, model checkpoints, dataset CSVs.

Embeddings are a diff-able text format. The first line is
``<count> <dim> <granularity>`` for the primary table (segment vectors, or
symbol vectors for symbol-level spaces); the remaining tables, the symbol
counts, the subject index and the vocabulary follow in tagged blocks, and
the file ends with a sha256 line over everything above it. Floats are
written with ``repr``, whose shortest round-trip representation restores
the exact double.

Checkpoints are ``.npz`` containers holding parameter blobs, batch-norm
running statistics, Adam moments and a JSON metadata record (format
version, architecture, epoch counter, content digest). Loading a
checkpoint restores a model whose continued training replays a straight
run bit-for-bit.

All writers go through a temp-file rename, so concurrent readers never
observe partial files.
"""

from __future__ import annotations

import hashlib
import io
import json
import os

import numpy as np

from .core import Granularity, TASK_NAMES, Vocabulary
from .embedding.space import EmbeddingSpace
from .exceptions import (
    DigestMismatch,
    DimensionMismatch,
    HeaderMismatch,
    TruncatedFile,
    VersionMismatch,
)

CHECKPOINT_VERSION = 1

_TABLE_ORDER = ("segment_vectors", "segment_out_weights",
                "symbol_vectors", "symbol_out_weights")


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic_write_bytes(path: str, payload: bytes) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


# --- embeddings ---------------------------------------------------------------

def _format_rows(out: list, table: np.ndarray) -> None:
    for i, row in enumerate(table):
        out.append(f"{i} " + " ".join(repr(float(v)) for v in row))


def save_embeddings(path: str, space: EmbeddingSpace, vocab: Vocabulary) -> None:
    primary = "symbol_vectors" if space.granularity.level == "sample" else "segment_vectors"
    lines = [f"{len(getattr(space, primary))} {space.dim} {space.granularity.level}"]
    lines.append(
        f"# meta samples_per_segment {space.granularity.samples_per_segment} "
        f"sampling_period_s {space.sampling_period_s}")
    for name in _TABLE_ORDER:
        table = getattr(space, name)
        lines.append(f"# table {name} {len(table)}")
        _format_rows(lines, table)
    lines.append(f"# counts {len(space.symbol_counts)}")
    for i, c in enumerate(space.symbol_counts):
        lines.append(f"{i} {int(c)}")
    lines.append(f"# subjects {len(space.subject_index)}")
    for sid, (start, count) in space.subject_index.items():
        lines.append(f"{sid} {start} {count}")
    lines.append(f"# vocab {vocab.size}")
    for i in range(vocab.size):
        raw = vocab.decode(i)
        lines.append(f"{i} {'UNK' if raw is None else raw}")
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    _atomic_write_text(path, body + f"# sha256 {digest}\n")


class _LineReader:
    def __init__(self, lines: list):
        self.lines = lines
        self.pos = 0

    def next(self, context: str) -> str:
        if self.pos >= len(self.lines):
            raise TruncatedFile(f"file ends inside {context}")
        line = self.lines[self.pos]
        self.pos += 1
        return line


def _parse_table(reader: _LineReader, name: str, count: int, dim: int) -> np.ndarray:
    table = np.empty((count, dim))
    for r in range(count):
        parts = reader.next(f"table {name}").split()
        if len(parts) != dim + 1:
            raise TruncatedFile(f"table {name} row {r}: expected {dim + 1} fields")
        if int(parts[0]) != r:
            raise HeaderMismatch(f"table {name} row {r} is labeled {parts[0]}")
        table[r] = [float(v) for v in parts[1:]]
    return table


def load_embeddings(path: str, expect_dim: int | None = None) -> tuple:
    """Load (space, vocabulary); validates digest, counts, and dimensions."""
    with open(path, encoding="utf-8") as fh:
        raw = fh.read()
    lines = raw.splitlines()
    if not lines or not lines[-1].startswith("# sha256 "):
        raise DigestMismatch("missing digest line")
    stored = lines[-1].split()[-1]
    body = "\n".join(lines[:-1]) + "\n"
    actual = hashlib.sha256(body.encode("utf-8")).hexdigest()
    if stored != actual:
        raise DigestMismatch(f"digest {actual[:12]}.. does not match stored {stored[:12]}..")

    reader = _LineReader(lines[:-1])
    header = reader.next("header").split()
    if len(header) != 3:
        raise HeaderMismatch(f"expected '<count> <dim> <granularity>', got {header!r}")
    try:
        primary_count, dim = int(header[0]), int(header[1])
    except ValueError:
        raise HeaderMismatch(f"non-integer header fields in {header!r}") from None
    level = header[2]
    if expect_dim is not None and dim != expect_dim:
        raise DimensionMismatch(f"file holds {dim}-dim vectors, expected {expect_dim}")

    meta = reader.next("meta").split()
    if meta[:2] != ["#", "meta"]:
        raise HeaderMismatch("missing meta line")
    fields = dict(zip(meta[2::2], meta[3::2]))
    granularity = Granularity(level, int(fields["samples_per_segment"]))
    period = int(fields["sampling_period_s"])

    tables = {}
    for name in _TABLE_ORDER:
        tag = reader.next(f"table header {name}").split()
        if tag[:2] != ["#", "table"] or tag[2] != name:
            raise HeaderMismatch(f"expected table {name}, got {tag!r}")
        tables[name] = _parse_table(reader, name, int(tag[3]), dim)

    primary = "symbol_vectors" if level == "sample" else "segment_vectors"
    if len(tables[primary]) != primary_count:
        raise HeaderMismatch(
            f"header claims {primary_count} primary rows, table has {len(tables[primary])}")

    tag = reader.next("counts header").split()
    if tag[:2] != ["#", "counts"]:
        raise HeaderMismatch("missing counts block")
    n = int(tag[2])
    counts = np.empty(n, dtype=np.int64)
    for r in range(n):
        parts = reader.next("counts").split()
        counts[r] = int(parts[1])

    tag = reader.next("subjects header").split()
    if tag[:2] != ["#", "subjects"]:
        raise HeaderMismatch("missing subjects block")
    subject_index = {}
    for _ in range(int(tag[2])):
        sid, start, count = reader.next("subjects").split()
        subject_index[sid] = (int(start), int(count))

    tag = reader.next("vocab header").split()
    if tag[:2] != ["#", "vocab"]:
        raise HeaderMismatch("missing vocab block")
    v = int(tag[2])
    raw_counts = {}
    unk_count = 0
    for r in range(v):
        parts = reader.next("vocab").split()
        if parts[1] == "UNK":
            unk_count = int(counts[r])
        else:
            raw_counts[int(parts[1])] = int(counts[r])
    vocab = Vocabulary.from_counts(raw_counts, missing_count=unk_count)
    if vocab.size != v:
        raise HeaderMismatch("vocab block disagrees with counts block")

    space = EmbeddingSpace(
        dim=dim, granularity=granularity,
        segment_vectors=tables["segment_vectors"],
        segment_out_weights=tables["segment_out_weights"],
        symbol_vectors=tables["symbol_vectors"],
        symbol_out_weights=tables["symbol_out_weights"],
        symbol_counts=counts, subject_index=subject_index,
        sampling_period_s=period)
    return space, vocab


# --- checkpoints ---------------------------------------------------------------

def _arrays_digest(arrays: dict) -> str:
    h = hashlib.sha256()
    for name in sorted(arrays):
        h.update(name.encode("utf-8"))
        h.update(np.ascontiguousarray(arrays[name]).tobytes())
    return h.hexdigest()


def save_checkpoint(path: str, model) -> None:
    """Persist a fitted ConvNet model (single- or multi-task) with optimizer state."""
    core = model.core_
    arrays = {}
    for name, arr in core.params().items():
        arrays[f"param/{name}"] = arr
    for name, arr in core.encoder.running_stats().items():
        arrays[f"running/{name}"] = arr
    for name, arr in core.optimizer.state_arrays().items():
        arrays[f"adam/{name}"] = arr
    arrays["trace"] = np.asarray(core.loss_trace, dtype=np.float64)

    meta = {
        "version": CHECKPOINT_VERSION,
        "kind": type(model).__name__,
        "constructor": model.get_params(deep=False),
        "spec": core.spec.to_json(),
        "tasks": core.tasks,
        "alphas": core.alphas,
        "lr": core.optimizer.lr,
        "seed": core.seed,
        "epochs_done": core.epochs_done,
        "digest": _arrays_digest(arrays),
    }
    meta["constructor"].pop("pretrained", None)

    buf = io.BytesIO()
    np.savez(buf, meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"),
                                     dtype=np.uint8), **arrays)
    _atomic_write_bytes(path, buf.getvalue())


def load_checkpoint(path: str):
    """Rebuild the model from a checkpoint; continued training resumes exactly."""
    from .models.convnet import ConvNetClassifier, MultiTaskConvNet, _ConvNetCore
    from .nn.network import NetworkSpec

    with np.load(path) as blob:
        arrays = {name: blob[name] for name in blob.files}
    meta = json.loads(arrays.pop("meta").tobytes().decode("utf-8"))
    if meta.get("version") != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"checkpoint version {meta.get('version')!r}, expected {CHECKPOINT_VERSION}")
    trace = arrays.pop("trace")
    stored = meta["digest"]
    check = dict(arrays)
    check["trace"] = trace
    if _arrays_digest(check) != stored:
        raise DigestMismatch("checkpoint content does not match its digest")

    spec = NetworkSpec.from_json(meta["spec"])
    core = _ConvNetCore(spec, meta["tasks"], meta["alphas"], meta["lr"],
                        meta["seed"], None)
    params = core.params()
    for name, arr in params.items():
        arr[...] = arrays[f"param/{name}"]
    core.encoder.load_running_stats(
        {name: arrays[f"running/{name}"]
         for name in core.encoder.running_stats()})
    adam_arrays = {name[len("adam/"):]: arr for name, arr in arrays.items()
                   if name.startswith("adam/")}
    core.optimizer.load_state_arrays(adam_arrays)
    core.epochs_done = int(meta["epochs_done"])
    core.loss_trace = trace.tolist()

    if meta["kind"] == "MultiTaskConvNet":
        model = MultiTaskConvNet(**meta["constructor"])
    else:
        model = ConvNetClassifier(**meta["constructor"])
    model.core_ = core
    model.loss_trace_ = core.loss_trace
    if hasattr(model, "task"):
        model.classes_ = np.arange(spec.heads[model.task])
    return model


# --- dataset CSV writers --------------------------------------------------------

def write_activity_csv(dataset, path: str) -> None:
    out = ["subject_id,timestamp_index,activity_count"]
    for seq in dataset.sequences:
        raw = dataset.raw_array(seq)
        sid = seq.subject_id
        for idx in range(len(raw)):
            v = raw[idx]
            out.append(f"{sid},{idx},{'NA' if v < 0 else v}")
    _atomic_write_text(path, "\n".join(out) + "\n")


def write_labels_csv(labels: dict, path: str) -> None:
    out = ["subject_id," + ",".join(TASK_NAMES)]
    for sid in sorted(labels):
        rec = labels[sid]
        cells = [str(-1 if rec.get(t) is None else rec.get(t)) for t in TASK_NAMES]
        out.append(f"{sid}," + ",".join(cells))
    _atomic_write_text(path, "\n".join(out) + "\n")
