"""Batch command-line interface.

Subcommands cover the whole pipeline: ``synth`` (generate a cohort),
``vocab`` (inspect the symbol alphabet), ``train-embed`` (learn segment
vectors), ``features``/``infer`` (extract per-subject features or raw
segment vectors), ``train-linear``/``train-cnn``/``train-multi`` (fit
classifiers), ``eval`` (the repeated-run protocol from an experiment
JSON), ``gradcheck`` (finite-difference verification), and ``export``
(render a report JSON as an aligned text table).

Conventions: exit 0 on success, 1 on usage errors, 2 on data errors, 3 on
numeric failures; errors print ``ERROR <code>: message`` on stderr; every
command writes a run manifest (full config snapshot, seeds, input digests,
output paths, wall clock) alongside its outputs. ``--config`` supplies a
JSON document whose keys override built-in defaults and are themselves
overridden by explicit flags; ``ACTON_SEED`` sets the default seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .core import TASK_NAMES
from .embedding import TrainConfig, infer_sequence, train_embeddings
from .evaluation import render_report_table, run_protocol, split_subjects
from .exceptions import ActonError, NumericError
from .ingest import merge_datasets, parse_activity_csv, parse_labels_csv, reencode
from .models import (
    ConvNetClassifier,
    LogisticProbe,
    MULTITASK_ALPHAS,
    MULTITASK_ALPHAS_PRETRAINED,
    MultiTaskConvNet,
)
from .persist import (
    load_embeddings,
    save_checkpoint,
    save_embeddings,
    write_activity_csv,
    write_labels_csv,
)
from .synthgen import SynthConfig, generate_cohort

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"ERROR {EXIT_USAGE}: {message}", file=sys.stderr)
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _default_seed() -> int:
    return int(os.environ.get("ACTON_SEED", "0"))


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(directory: str, command: str, config: dict, seeds,
                    inputs, outputs, started: float) -> str:
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "seeds": seeds if isinstance(seeds, list) else [seeds],
        "inputs": {p: _sha256_file(p) for p in inputs},
        "outputs": sorted(outputs),
        "wall_clock_s": round(time.time() - started, 3),
    }
    path = os.path.join(directory, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _pick(args_value, config: dict, key: str, default):
    """Explicit flag beats config file beats built-in default."""
    if args_value is not None:
        return args_value
    if key in config:
        return config[key]
    return default


def _read_activity(paths, sequence_length=None, period=30):
    datasets = [parse_activity_csv(open(p, encoding="utf-8").read(),
                                   sequence_length=sequence_length,
                                   sampling_period_s=period, source=p)
                for p in paths]
    return datasets[0] if len(datasets) == 1 else merge_datasets(datasets)


def _attach_labels(dataset, labels_path):
    labels = parse_labels_csv(open(labels_path, encoding="utf-8").read())
    return dataset.with_labels(labels)


# --- subcommand handlers -----------------------------------------------------

def _cmd_synth(args) -> int:
    started = time.time()
    doc = _load_config(args.config)
    doc.setdefault("n_subjects", 10)
    if args.subjects is not None:
        doc["n_subjects"] = args.subjects
    if args.days is not None:
        doc["days"] = args.days
    if args.period is not None:
        doc["sampling_period_s"] = args.period
    doc["seed"] = _pick(args.seed, doc, "seed", _default_seed())
    cfg = SynthConfig.from_json(json.dumps(doc))
    dataset = generate_cohort(cfg, n_threads=args.threads)

    os.makedirs(args.out, exist_ok=True)
    activity = os.path.join(args.out, "activity.csv")
    write_activity_csv(dataset, activity)
    outputs = [activity]
    if dataset.labels:
        labels = os.path.join(args.out, "labels.csv")
        write_labels_csv(dataset.labels, labels)
        outputs.append(labels)
    outputs.append(_write_manifest(
        args.out, "synth", json.loads(cfg.to_json()), cfg.seed,
        [args.config] if args.config else [], outputs, started))
    print(f"wrote {len(dataset.sequences)} subjects to {args.out}")
    return EXIT_OK


def _cmd_vocab(args) -> int:
    started = time.time()
    dataset = _read_activity(args.activity)
    vocab = dataset.vocab
    doc = {
        "size": vocab.size,
        "unk_id": vocab.unk_id,
        "missing_count": int(vocab.counts[-1]),
        "counts": {int(r): int(vocab.counts[i])
                   for i, r in enumerate(vocab.raw_values)},
    }
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(os.path.dirname(os.path.abspath(args.out)), "vocab",
                    {"activity": args.activity}, [], args.activity,
                    [args.out], started)
    print(f"vocabulary of {vocab.size} symbols -> {args.out}")
    return EXIT_OK


def _cmd_train_embed(args) -> int:
    started = time.time()
    config = _load_config(args.config)
    period = _pick(args.period, config, "sampling_period_s", 30)
    dataset = _read_activity(args.activity, period=period)
    cfg = TrainConfig(
        granularity=_pick(args.granularity, config, "granularity", "day"),
        dim=_pick(args.dim, config, "dim", 100),
        window=_pick(args.window, config, "window", None),
        negatives=_pick(args.negatives, config, "negatives", 5),
        eta=_pick(args.eta, config, "eta", None),
        neighbor_set_size=_pick(args.neighbors, config, "neighbor_set_size", 2),
        epochs=_pick(args.epochs, config, "epochs", 20),
        lr_start=_pick(args.lr_start, config, "lr_start", 0.025),
        lr_end=_pick(args.lr_end, config, "lr_end", 1e-4),
        convergence_tol=_pick(args.tol, config, "convergence_tol", 1e-4),
        seed=_pick(args.seed, config, "seed", _default_seed()),
        n_threads=1 if args.deterministic else args.threads,
    )
    space, trace = train_embeddings(dataset, cfg)
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    os.makedirs(out_dir, exist_ok=True)
    save_embeddings(args.out, space, dataset.vocab)
    trace_path = args.trace or f"{args.out}.trace.csv"
    with open(trace_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,total,segment,neighbor,smoothing\n")
        for i, t in enumerate(trace):
            fh.write(f"{i},{t.total!r},{t.segment!r},{t.neighbor!r},{t.smoothing!r}\n")
    resolved = cfg.resolve(dataset.sequences[0].sampling_period_s)
    _write_manifest(out_dir, "train-embed",
                    {k: getattr(resolved, k) for k in (
                        "granularity", "dim", "window", "negatives", "eta",
                        "neighbor_set_size", "epochs", "lr_start", "lr_end",
                        "convergence_tol", "seed")},
                    cfg.seed, args.activity, [args.out, trace_path], started)
    print(f"trained {cfg.granularity} space ({len(trace)} epochs, "
          f"final loss {trace[-1].total:.4f}) -> {args.out}")
    return EXIT_OK


def _features_for(space, vocab, dataset, steps: int, seed: int):
    from .embedding import sequence_features

    encoded = reencode(dataset, vocab)
    rows = []
    for i, seq in enumerate(encoded.sequences):
        if space.granularity.level == "sample" or space.has_subject(seq.subject_id):
            rows.append((seq.subject_id, sequence_features(space, seq)))
        else:
            vectors = infer_sequence(space, seq, steps, seed=seed + i)
            rows.append((seq.subject_id, sequence_features(space, seq, vectors=vectors)))
    return rows


def _cmd_features(args) -> int:
    started = time.time()
    space, vocab = load_embeddings(args.embeddings)
    dataset = _read_activity(args.activity, period=space.sampling_period_s)
    seed = args.seed if args.seed is not None else _default_seed()
    rows = _features_for(space, vocab, dataset, args.infer_steps, seed)
    width = len(rows[0][1])
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    os.makedirs(out_dir, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("subject_id," + ",".join(f"f{i}" for i in range(width)) + "\n")
        for sid, feats in rows:
            fh.write(sid + "," + ",".join(repr(float(v)) for v in feats) + "\n")
    _write_manifest(out_dir, "features",
                    {"embeddings": args.embeddings, "infer_steps": args.infer_steps},
                    seed, [args.embeddings, *args.activity], [args.out], started)
    print(f"{len(rows)} subjects x {width} features -> {args.out}")
    return EXIT_OK


def _cmd_infer(args) -> int:
    started = time.time()
    space, vocab = load_embeddings(args.embeddings)
    dataset = _read_activity(args.activity, period=space.sampling_period_s)
    encoded = reencode(dataset, vocab)
    seed = args.seed if args.seed is not None else _default_seed()
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    os.makedirs(out_dir, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("subject_id,segment_index," +
                 ",".join(f"v{i}" for i in range(space.dim)) + "\n")
        for i, seq in enumerate(encoded.sequences):
            vectors = infer_sequence(space, seq, args.steps, seed=seed + i)
            for k, vec in enumerate(vectors):
                fh.write(f"{seq.subject_id},{k}," +
                         ",".join(repr(float(v)) for v in vec) + "\n")
    _write_manifest(out_dir, "infer", {"embeddings": args.embeddings,
                                       "steps": args.steps},
                    seed, [args.embeddings, *args.activity], [args.out], started)
    print(f"inferred segment vectors for {len(encoded.sequences)} subjects -> {args.out}")
    return EXIT_OK


def _read_features_csv(path: str):
    import csv as _csv

    with open(path, encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        sids, rows = [], []
        for row in reader:
            sids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return sids, np.array(rows), header


def _cmd_train_linear(args) -> int:
    started = time.time()
    sids, feats, _ = _read_features_csv(args.features)
    labels = parse_labels_csv(open(args.labels, encoding="utf-8").read())
    y = np.array([
        -1 if sid not in labels or labels[sid].get(args.task) is None
        else labels[sid].get(args.task) for sid in sids])
    keep = y >= 0
    seed = args.seed if args.seed is not None else _default_seed()
    model = LogisticProbe(lr=args.lr, l2=args.l2, epochs=args.epochs,
                          batch_size=args.batch, seed=seed)
    model.fit(feats[keep], y[keep])
    train_acc = float(np.mean(model.predict(feats[keep]) == y[keep]))
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    os.makedirs(out_dir, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"task": args.task, "weights": model.W_.tolist(),
                   "bias": model.b_.tolist(), "train_accuracy": train_acc},
                  fh, indent=2)
        fh.write("\n")
    _write_manifest(out_dir, "train-linear",
                    {"task": args.task, "lr": args.lr, "l2": args.l2,
                     "epochs": args.epochs, "batch": args.batch},
                    seed, [args.features, args.labels], [args.out], started)
    print(f"linear model for {args.task}: train accuracy {train_acc:.3f} -> {args.out}")
    return EXIT_OK


def _arch_kwargs(args, config: dict) -> dict:
    return dict(
        embedding_dim=_pick(args.dim, config, "embedding_dim", 16),
        n_filters=_pick(args.filters, config, "n_filters", 64),
        kernel=_pick(args.kernel, config, "kernel", 5),
        pool=_pick(args.pool, config, "pool", 4),
        dense_units=_pick(args.dense, config, "dense_units", 64),
        dropout=_pick(args.dropout, config, "dropout", 0.5),
        lambda1=_pick(args.l1, config, "lambda1", 0.25),
        lambda2=_pick(args.l2, config, "lambda2", 0.25),
        lr=_pick(args.lr, config, "lr", 1e-3),
        batch_size=_pick(args.batch, config, "batch_size", 32),
        epochs=_pick(args.epochs, config, "epochs", 50),
    )


def _load_pretrained(path: str | None):
    if not path:
        return None, None
    space, vocab = load_embeddings(path)
    if len(space.symbol_vectors) == 0:
        raise ActonError(
            "pretrained initialization needs a symbol-level (sample granularity) space")
    return space.symbol_vectors, vocab


def _cmd_train_cnn(args) -> int:
    started = time.time()
    config = _load_config(args.config)
    period = _pick(args.period, config, "sampling_period_s", 30)
    dataset = _attach_labels(_read_activity(args.activity, period=period), args.labels)
    table, vocab = _load_pretrained(args.pretrained)
    if vocab is not None:
        dataset = reencode(dataset, vocab).with_labels(dataset.labels)
    seed = args.seed if args.seed is not None else _default_seed()
    from .experiments import label_vector

    y = label_vector(dataset, args.task, dataset.subject_ids)
    model = ConvNetClassifier(task=args.task, seed=seed,
                              vocab_size=dataset.vocab.size, pretrained=table,
                              **_arch_kwargs(args, config))
    model.fit(dataset, y)
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    os.makedirs(out_dir, exist_ok=True)
    save_checkpoint(args.out, model)
    inputs = [*args.activity, args.labels] + ([args.pretrained] if args.pretrained else [])
    _write_manifest(out_dir, "train-cnn",
                    {"task": args.task, **_arch_kwargs(args, config)},
                    seed, inputs, [args.out], started)
    print(f"CNN for {args.task}: final loss {model.loss_trace_[-1]:.4f} -> {args.out}")
    return EXIT_OK


def _parse_alphas(text: str | None, pretrained: bool) -> dict:
    if text is None:
        return MULTITASK_ALPHAS_PRETRAINED if pretrained else MULTITASK_ALPHAS
    values = [float(v) for v in text.split(",")]
    if len(values) != len(TASK_NAMES):
        raise ActonError(f"--alphas needs {len(TASK_NAMES)} comma-separated values "
                         f"in order {','.join(TASK_NAMES)}")
    return dict(zip(TASK_NAMES, values))


def _cmd_train_multi(args) -> int:
    started = time.time()
    config = _load_config(args.config)
    period = _pick(args.period, config, "sampling_period_s", 30)
    dataset = _attach_labels(_read_activity(args.activity, period=period), args.labels)
    table, vocab = _load_pretrained(args.pretrained)
    if vocab is not None:
        dataset = reencode(dataset, vocab).with_labels(dataset.labels)
    seed = args.seed if args.seed is not None else _default_seed()
    from .experiments import label_vector

    labels = {m: label_vector(dataset, m, dataset.subject_ids) for m in TASK_NAMES}
    alphas = _parse_alphas(args.alphas, args.pretrained is not None)
    model = MultiTaskConvNet(alphas=alphas, seed=seed,
                             vocab_size=dataset.vocab.size, pretrained=table,
                             depth=_pick(args.depth, config, "depth", 3),
                             **_arch_kwargs(args, config))
    model.fit(dataset, labels)
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    os.makedirs(out_dir, exist_ok=True)
    save_checkpoint(args.out, model)
    inputs = [*args.activity, args.labels] + ([args.pretrained] if args.pretrained else [])
    _write_manifest(out_dir, "train-multi",
                    {"alphas": alphas, **_arch_kwargs(args, config)},
                    seed, inputs, [args.out], started)
    print(f"multi-task CNN: final loss {model.loss_trace_[-1]:.4f} -> {args.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    started = time.time()
    from .experiments import (
        baseline_runner,
        cnn_runner,
        linear_probe_runner,
        multitask_runner,
    )

    doc = _load_config(args.experiment)
    dataset = _attach_labels(
        _read_activity(doc["activity"] if isinstance(doc["activity"], list)
                       else [doc["activity"]],
                       period=doc.get("period", 30)),
        doc["labels"])
    split = split_subjects(dataset.subject_ids,
                           dev_fraction=doc.get("dev_fraction", 0.1),
                           test_fraction=doc.get("test_fraction", 0.2),
                           split_seed=doc.get("split_seed", 1234))
    kind = doc.get("model", "linear")
    task = doc.get("task", "apnea")
    if kind == "linear":
        spec = linear_probe_runner(dataset, task, split,
                                   granularity=doc.get("granularity", "day"),
                                   embed=doc.get("embed"), probe=doc.get("probe"))
    elif kind in ("majority", "random"):
        spec = baseline_runner(dataset, task, split, kind=kind)
    elif kind == "cnn":
        spec = cnn_runner(dataset, task, split, params=doc.get("model_params"),
                          pretrain=doc.get("pretrain"))
    elif kind == "multi":
        spec = multitask_runner(dataset, task, split,
                                params=doc.get("model_params"),
                                alphas=doc.get("alphas"),
                                pretrain=doc.get("pretrain"))
    else:
        raise ActonError(f"unknown model kind {kind!r}")
    seed_base = doc.get("seed_base", _default_seed())
    report = run_protocol(spec, repeats=doc.get("repeats", 10), seed_base=seed_base)

    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    from .core import TASK_CLASSES

    table_path = os.path.join(args.out, "table.txt")
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(render_report_table([report],
                                     multiclass=TASK_CLASSES[task] > 2) + "\n")
    inputs = ([args.experiment, doc["labels"]] +
              (doc["activity"] if isinstance(doc["activity"], list)
               else [doc["activity"]]))
    _write_manifest(args.out, "eval", doc, list(report.seeds), inputs,
                    [report_path, table_path], started)
    print(render_report_table([report], multiclass=TASK_CLASSES[task] > 2))
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    from .models.convnet import _ConvNetCore
    from .nn import NetworkSpec, gradient_check
    from .nn.network import ConvBlockSpec

    rng = np.random.default_rng(args.seed if args.seed is not None else _default_seed())
    if args.arch:
        spec = NetworkSpec.from_json(open(args.arch, encoding="utf-8").read())
    else:
        spec = NetworkSpec(
            vocab_size=6, embedding_dim=3, sequence_length=12,
            conv_blocks=[ConvBlockSpec(filters=4, kernel=3, pool=2, pool_stride=2)],
            dense_units=5, dropout=0.0, lambda1=0.0, lambda2=0.25,
            heads={"apnea": 2})
    task = next(iter(spec.heads))
    core = _ConvNetCore(spec, [task], {task: 1.0}, lr=1e-3,
                        seed=int(rng.integers(1 << 31)), pretrained_table=None)
    ids = rng.integers(0, spec.vocab_size, size=(4, spec.sequence_length))
    golds = rng.integers(0, spec.heads[task], size=4).astype(np.int64)

    class _Adapter:
        params = core.params

        @staticmethod
        def loss_and_grads(i, g):
            return core.loss_and_grads(i, {task: g})

    report = gradient_check(_Adapter(), ids, golds)
    for name in sorted(report.per_param):
        print(f"{name:24s} {report.per_param[name]:.3e}")
    status = "PASS" if report.passed(args.tolerance) else "FAIL"
    print(f"max relative error {report.max_relative_error:.3e} "
          f"({report.worst_param}) tolerance {args.tolerance:g}: {status}")
    if not np.isfinite(report.max_relative_error):
        raise NumericError("gradient check produced non-finite values")
    return EXIT_OK


def _cmd_export(args) -> int:
    from .evaluation import MetricsReport

    reports = []
    for path in args.report:
        doc = json.loads(open(path, encoding="utf-8").read())
        reports.append(MetricsReport(doc["name"], doc["repeats"], doc["per_run"],
                                     doc["mean"], doc.get("seeds", [])))
    table = render_report_table(reports, multiclass=args.multiclass)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table + "\n")
    print(table)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="acton",
                     description="activity embeddings and disorder classifiers")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=None,
                       help="run seed (default: $ACTON_SEED or 0)")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--deterministic", action="store_true", default=True)
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (throughput mode, not reproducible)")

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=None)
    p.add_argument("--days", type=int, default=None)
    p.add_argument("--period", type=int, default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("vocab", help="build and dump the vocabulary")
    add_common(p)
    p.add_argument("--activity", action="append", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_vocab)

    p = sub.add_parser("train-embed", help="train segment embeddings")
    add_common(p)
    p.add_argument("--activity", action="append", required=True)
    p.add_argument("--period", type=int, default=None,
                   help="sampling period of the activity CSV in seconds (default 30)")
    p.add_argument("--granularity", choices=["sample", "hour", "day", "week"],
                   default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--negatives", type=int, default=None)
    p.add_argument("--neighbors", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr-start", type=float, default=None)
    p.add_argument("--lr-end", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--trace", default=None, help="loss trace CSV path")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_embed)

    p = sub.add_parser("features", help="per-subject concatenated features")
    add_common(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--activity", action="append", required=True)
    p.add_argument("--infer-steps", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("infer", help="embed held-out sequences")
    add_common(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--activity", action="append", required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("train-linear", help="logistic probe on features")
    add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--task", choices=TASK_NAMES, required=True)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_linear)

    def add_cnn_args(p):
        p.add_argument("--activity", action="append", required=True)
        p.add_argument("--labels", required=True)
        p.add_argument("--period", type=int, default=None,
                       help="sampling period of the activity CSV in seconds (default 30)")
        p.add_argument("--pretrained", default=None,
                       help="embeddings file (sample granularity) to seed E")
        p.add_argument("--dim", type=int, default=None)
        p.add_argument("--filters", type=int, default=None)
        p.add_argument("--kernel", type=int, default=None)
        p.add_argument("--pool", type=int, default=None)
        p.add_argument("--dense", type=int, default=None)
        p.add_argument("--dropout", type=float, default=None)
        p.add_argument("--l1", type=float, default=None)
        p.add_argument("--l2", type=float, default=None)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--batch", type=int, default=None)
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--out", required=True)

    p = sub.add_parser("train-cnn", help="task-specific CNN")
    add_common(p)
    add_cnn_args(p)
    p.add_argument("--task", choices=TASK_NAMES, required=True)
    p.set_defaults(func=_cmd_train_cnn)

    p = sub.add_parser("train-multi", help="shared-encoder multi-task CNN")
    add_common(p)
    add_cnn_args(p)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--alphas", default=None,
                   help=f"comma-separated weights in order {','.join(TASK_NAMES)}")
    p.set_defaults(func=_cmd_train_multi)

    p = sub.add_parser("eval", help="repeated-run protocol from an experiment JSON")
    add_common(p)
    p.add_argument("--experiment", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient report")
    add_common(p)
    p.add_argument("--arch", default=None, help="network architecture JSON")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("export", help="render report JSON as an aligned table")
    add_common(p)
    p.add_argument("--report", action="append", required=True)
    p.add_argument("--multiclass", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"ERROR {EXIT_NUMERIC}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ActonError as exc:
        print(f"ERROR {EXIT_DATA}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"ERROR {EXIT_DATA}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
