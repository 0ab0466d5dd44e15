"""Experiment runners shared by the CLI and the acceptance checks.

Each runner closes over a dataset, a model configuration, and a fixed
subject split, and exposes ``run_fn(seed)`` for the repeated-run protocol:
everything except the seed is frozen, matching the evaluation discipline
of averaging repeated runs over one split.

Embeddings are trained transductively on the whole corpus (they are
unsupervised; labels never leak), so probe runs retrain the embedding
space under each run seed and then fit the classifier on the training
subjects only.
"""

from __future__ import annotations

import numpy as np

from .embedding import TrainConfig, sequence_features, train_embeddings
from .evaluation import ExperimentSpec, SubjectSplit
from .exceptions import NoLabeledSubjects
from .ingest import Dataset
from .models import (
    ConvNetClassifier,
    LogisticProbe,
    MajorityBaseline,
    MultiTaskConvNet,
    RandomBaseline,
)
from ._validation import as_symbol_matrix


def label_vector(dataset: Dataset, task: str, subjects) -> np.ndarray:
    """Labels for the given subjects in order; -1 where missing."""
    out = np.full(len(subjects), -1, dtype=np.int64)
    labels = dataset.labels or {}
    for i, sid in enumerate(subjects):
        rec = labels.get(sid)
        if rec is not None and rec.get(task) is not None:
            out[i] = rec.get(task)
    return out


def mask_labels(y: np.ndarray, keep_n: int, seed: int,
                stratified: bool = True) -> np.ndarray:
    """Keep labels for ``keep_n`` subjects (seeded choice), mask the rest.

    Stratified keeps roughly the class proportions of the labeled pool, so
    a scarce subset is still representative; every class with any support
    keeps at least one label.
    """
    labeled = np.flatnonzero(y >= 0)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    if not stratified:
        keep = rng.permutation(labeled)[:keep_n]
    else:
        keep = []
        classes = np.unique(y[labeled])
        pools = {c: rng.permutation(labeled[y[labeled] == c]) for c in classes}
        quota = {c: max(1, int(round(keep_n * len(pools[c]) / len(labeled))))
                 for c in classes}
        for c in classes:
            keep.extend(pools[c][:quota[c]].tolist())
        keep = np.array(keep[:max(keep_n, len(classes))], dtype=np.int64)
    out = np.full_like(y, -1)
    out[keep] = y[keep]
    return out


def embed_corpus_features(dataset: Dataset, granularity: str, seed: int,
                          **overrides) -> dict:
    """Train embeddings on the full corpus; features per subject id."""
    cfg = TrainConfig(granularity=granularity, seed=seed, **overrides)
    space, _ = train_embeddings(dataset, cfg)
    return {seq.subject_id: sequence_features(space, seq)
            for seq in dataset.sequences}


def linear_probe_runner(dataset: Dataset, task: str, split: SubjectSplit,
                        granularity: str = "day", embed: dict | None = None,
                        probe: dict | None = None) -> ExperimentSpec:
    embed = dict(embed or {})
    probe = dict(probe or {})
    train_y = label_vector(dataset, task, split.train)
    test_y = label_vector(dataset, task, split.test)
    train_ok = np.flatnonzero(train_y >= 0)
    test_ok = np.flatnonzero(test_y >= 0)
    if len(train_ok) == 0 or len(test_ok) == 0:
        raise NoLabeledSubjects(f"split leaves no labeled subjects for {task!r}")

    def run(seed: int):
        feats = embed_corpus_features(dataset, granularity, seed, **embed)
        x_train = np.vstack([feats[split.train[i]] for i in train_ok])
        x_test = np.vstack([feats[split.test[i]] for i in test_ok])
        model = LogisticProbe(seed=seed, **probe)
        model.fit(x_train, train_y[train_ok])
        return model.predict(x_test), test_y[test_ok]

    from .core import TASK_CLASSES

    return ExperimentSpec(f"{granularity}-probe-{task}", run, TASK_CLASSES[task])


def baseline_runner(dataset: Dataset, task: str, split: SubjectSplit,
                    kind: str = "majority") -> ExperimentSpec:
    from .core import TASK_CLASSES

    train_y = label_vector(dataset, task, split.train)
    test_y = label_vector(dataset, task, split.test)
    train_ok = train_y[train_y >= 0]
    test_ok = np.flatnonzero(test_y >= 0)

    def run(seed: int):
        if kind == "majority":
            model = MajorityBaseline().fit(None, train_ok)
        else:
            model = RandomBaseline(seed=seed).fit(None, train_ok)
        return model.predict(np.zeros((len(test_ok), 1))), test_y[test_ok]

    return ExperimentSpec(f"{kind}-{task}", run, TASK_CLASSES[task])


def _pretrained_table(dataset: Dataset, seed: int, pretrain: dict):
    cfg = TrainConfig(granularity="sample", seed=seed, **pretrain)
    space, _ = train_embeddings(dataset, cfg)
    return space.symbol_vectors


def cnn_runner(dataset: Dataset, task: str, split: SubjectSplit,
               params: dict | None = None, pretrain: dict | None = None) -> ExperimentSpec:
    """Task-specific CNN; ``pretrain`` holds symbol-embedding overrides."""
    from .core import TASK_CLASSES

    params = dict(params or {})
    ids = as_symbol_matrix(dataset)
    index = {sid: i for i, sid in enumerate(dataset.subject_ids)}
    train_y = label_vector(dataset, task, split.train)
    test_y = label_vector(dataset, task, split.test)
    train_rows = [index[s] for s in split.train]
    test_rows = [index[s] for s in split.test]
    test_ok = np.flatnonzero(test_y >= 0)

    def run(seed: int):
        table = _pretrained_table(dataset, seed, pretrain) if pretrain else None
        model = ConvNetClassifier(task=task, seed=seed,
                                  vocab_size=dataset.vocab.size,
                                  pretrained=table, **params)
        model.fit(ids[train_rows], train_y)
        preds = model.predict(ids[[test_rows[i] for i in test_ok]])
        return preds, test_y[test_ok]

    tag = "cnn-pre" if pretrain else "cnn"
    return ExperimentSpec(f"{tag}-{task}", run, TASK_CLASSES[task])


def multitask_runner(dataset: Dataset, eval_task: str, split: SubjectSplit,
                     params: dict | None = None, alphas: dict | None = None,
                     pretrain: dict | None = None,
                     train_labels: dict | None = None) -> ExperimentSpec:
    """Joint model over all four heads, evaluated on one task.

    ``train_labels`` optionally overrides the per-task training label
    vectors (aligned with split.train), letting experiments plant label
    scarcity for specific tasks.
    """
    from .core import TASK_CLASSES, TASK_NAMES

    params = dict(params or {})
    ids = as_symbol_matrix(dataset)
    index = {sid: i for i, sid in enumerate(dataset.subject_ids)}
    train_rows = [index[s] for s in split.train]
    test_rows = [index[s] for s in split.test]
    labels = {m: label_vector(dataset, m, split.train) for m in TASK_NAMES}
    if train_labels:
        labels.update(train_labels)
    test_y = label_vector(dataset, eval_task, split.test)
    test_ok = np.flatnonzero(test_y >= 0)

    def run(seed: int):
        table = _pretrained_table(dataset, seed, pretrain) if pretrain else None
        model = MultiTaskConvNet(alphas=alphas, seed=seed,
                                 vocab_size=dataset.vocab.size,
                                 pretrained=table, **params)
        model.fit(ids[train_rows], labels)
        preds = model.predict(ids[[test_rows[i] for i in test_ok]])[eval_task]
        return preds, test_y[test_ok]

    return ExperimentSpec(f"multi-{eval_task}", run, TASK_CLASSES[eval_task])
