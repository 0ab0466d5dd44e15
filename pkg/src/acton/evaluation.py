"""Confusion-matrix metrics and the repeated-run experiment protocol.

Multiclass reports carry two micro-F1 variants: pooled over all classes
(algebraically equal to accuracy for single-label problems, and asserted
so on every report) and pooled with the majority-support class excluded,
which isolates performance on the minority classes. 0/0 metric cells
evaluate to 0 and raise a degeneracy flag rather than NaN.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import LabelOutOfRange, LengthMismatch


def confusion(preds, golds, n_classes: int | None = None) -> np.ndarray:
    """Count matrix with rows = gold class, columns = predicted class."""
    preds = np.asarray(preds, dtype=np.int64)
    golds = np.asarray(golds, dtype=np.int64)
    if preds.shape != golds.shape:
        raise LengthMismatch(f"{len(preds)} predictions vs {len(golds)} golds")
    if n_classes is None:
        n_classes = int(max(preds.max(initial=-1), golds.max(initial=-1))) + 1
        n_classes = max(n_classes, 1)
    if preds.size and (preds.min() < 0 or golds.min() < 0
                       or preds.max() >= n_classes or golds.max() >= n_classes):
        raise LabelOutOfRange(f"labels outside [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (golds, preds), 1)
    return cm


def _ratio(num: float, den: float) -> tuple:
    """num/den with the 0/0 -> (0, flagged) convention."""
    if den == 0:
        return 0.0, True
    return num / den, False


@dataclass
class BinaryMetrics:
    accuracy: float
    precision: float
    recall: float
    specificity: float
    f1: float
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("accuracy", "precision", "recall", "specificity", "f1", "degenerate")}


def binary_metrics(cm: np.ndarray, positive_class: int = 1) -> BinaryMetrics:
    cm = np.asarray(cm)
    if cm.shape != (2, 2):
        raise LengthMismatch(f"binary metrics need a 2x2 matrix, got {cm.shape}")
    p = positive_class
    n = 1 - p
    tp, fn = float(cm[p, p]), float(cm[p, n])
    fp, tn = float(cm[n, p]), float(cm[n, n])
    total = tp + fp + fn + tn
    accuracy, d0 = _ratio(tp + tn, total)
    precision, d1 = _ratio(tp, tp + fp)
    recall, d2 = _ratio(tp, tp + fn)
    specificity, d3 = _ratio(tn, tn + fp)
    f1, d4 = _f1(precision, recall)
    return BinaryMetrics(accuracy, precision, recall, specificity, f1,
                         degenerate=d0 or d1 or d2 or d3 or d4)


def _f1(precision: float, recall: float) -> tuple:
    if precision == recall:
        # harmonic mean of equal values is that value, kept exact
        return precision, precision == 0.0
    if precision + recall == 0.0:
        return 0.0, True
    return 2.0 * precision * recall / (precision + recall), False


@dataclass
class MulticlassMetrics:
    accuracy: float
    per_class: list                    # one BinaryMetrics-style dict per class
    macro_f1: float
    micro_f1_all: float                # pooled over all classes; equals accuracy
    micro_f1_nonmajority: float        # pooled with the largest-support class left out
    weighted_precision: float
    weighted_recall: float             # equals accuracy by the support-weighted identity
    weighted_f1: float
    support: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        # single-label identities, exact by construction
        assert self.micro_f1_all == self.accuracy
        assert self.weighted_recall == self.accuracy

    def as_dict(self) -> dict:
        doc = {k: getattr(self, k) for k in (
            "accuracy", "macro_f1", "micro_f1_all", "micro_f1_nonmajority",
            "weighted_precision", "weighted_recall", "weighted_f1", "degenerate")}
        doc["per_class"] = self.per_class
        doc["support"] = self.support.tolist()
        return doc


def multiclass_metrics(cm: np.ndarray) -> MulticlassMetrics:
    cm = np.asarray(cm, dtype=np.int64)
    k = cm.shape[0]
    if cm.ndim != 2 or cm.shape[1] != k or k < 2:
        raise LengthMismatch(f"need a square KxK matrix with K >= 2, got {cm.shape}")
    total = int(cm.sum())
    tp = np.diag(cm)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)

    accuracy, deg = _ratio(float(tp.sum()), float(total))
    per_class = []
    f1s = np.zeros(k)
    precisions = np.zeros(k)
    for c in range(k):
        prec, d1 = _ratio(float(tp[c]), float(predicted[c]))
        rec, d2 = _ratio(float(tp[c]), float(support[c]))
        spec_den = float(total - support[c])
        spec, d3 = _ratio(float(total - support[c] - predicted[c] + tp[c]), spec_den)
        f1, d4 = _f1(prec, rec)
        deg = deg or d1 or d2 or d3 or d4
        precisions[c] = prec
        f1s[c] = f1
        per_class.append({"precision": prec, "recall": rec,
                          "specificity": spec, "f1": f1})

    macro_f1 = float(f1s.mean())
    # pooled over all classes: FP and FN totals both equal total - trace in
    # single-label data, so micro precision and recall are the same division
    pool_fp_all = float((predicted - tp).sum())
    pool_fn_all = float((support - tp).sum())
    mp_all, d8 = _ratio(float(tp.sum()), float(tp.sum()) + pool_fp_all)
    mr_all, d9 = _ratio(float(tp.sum()), float(tp.sum()) + pool_fn_all)
    micro_all, d10 = _f1(mp_all, mr_all)
    deg = deg or d8 or d9 or d10

    majority = int(np.argmax(support))          # ties break to the lowest id
    rest = [c for c in range(k) if c != majority]
    pool_tp = float(tp[rest].sum())
    pool_fp = float((predicted[rest] - tp[rest]).sum())
    pool_fn = float((support[rest] - tp[rest]).sum())
    mp, d5 = _ratio(pool_tp, pool_tp + pool_fp)
    mr, d6 = _ratio(pool_tp, pool_tp + pool_fn)
    micro_nonmaj, d7 = _f1(mp, mr)
    deg = deg or d5 or d6 or d7

    weighted_precision = float((support / max(total, 1)) @ precisions)
    weighted_recall = accuracy    # sum_c (n_c/N)(TP_c/n_c) = trace/N exactly
    weighted_f1 = float((support / max(total, 1)) @ f1s)

    return MulticlassMetrics(
        accuracy=accuracy, per_class=per_class, macro_f1=macro_f1,
        micro_f1_all=micro_all, micro_f1_nonmajority=micro_nonmaj,
        weighted_precision=weighted_precision, weighted_recall=weighted_recall,
        weighted_f1=weighted_f1, support=support, degenerate=deg)


# --- repeated-run protocol ----------------------------------------------------

@dataclass
class SubjectSplit:
    train: tuple
    dev: tuple
    test: tuple


def split_subjects(subject_ids, dev_fraction: float = 0.1,
                   test_fraction: float = 0.2, split_seed: int = 1234) -> SubjectSplit:
    """Deterministic train/dev/test split, fixed across protocol runs."""
    ids = sorted(subject_ids)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(split_seed)))
    order = rng.permutation(len(ids))
    n_dev = int(round(dev_fraction * len(ids)))
    n_test = int(round(test_fraction * len(ids)))
    dev = tuple(ids[i] for i in order[:n_dev])
    test = tuple(ids[i] for i in order[n_dev:n_dev + n_test])
    train = tuple(ids[i] for i in order[n_dev + n_test:])
    return SubjectSplit(train, dev, test)


@dataclass
class ExperimentSpec:
    """A fully specified experiment: call ``run_fn(seed)`` for one run.

    ``run_fn`` must return (predictions, golds) on the fixed evaluation
    split; the data, model configuration and split all live inside the
    closure so that only the seed varies between repeats.
    """

    name: str
    run_fn: object
    n_classes: int


@dataclass
class MetricsReport:
    name: str
    repeats: int
    per_run: list                      # metric dicts, one per run
    mean: dict
    seeds: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "name": self.name, "repeats": self.repeats, "seeds": self.seeds,
            "mean": self.mean, "per_run": self.per_run}, indent=2, sort_keys=True)


def _scalar_fields(doc: dict) -> dict:
    return {k: v for k, v in doc.items() if isinstance(v, (int, float, bool))}


def run_protocol(spec: ExperimentSpec, repeats: int = 10, seed_base: int = 0) -> MetricsReport:
    """Run an experiment ``repeats`` times and average the metric suite.

    Runs use seeds ``seed_base .. seed_base + repeats - 1`` over the same
    fixed split; per-run values are retained for variance reporting.
    """
    per_run = []
    seeds = list(range(seed_base, seed_base + repeats))
    for seed in seeds:
        preds, golds = spec.run_fn(seed)
        cm = confusion(preds, golds, n_classes=spec.n_classes)
        if spec.n_classes == 2:
            doc = binary_metrics(cm).as_dict()
            mc = multiclass_metrics(cm)
            doc["macro_f1"] = mc.macro_f1
            doc["micro_f1_all"] = mc.micro_f1_all
            doc["micro_f1_nonmajority"] = mc.micro_f1_nonmajority
        else:
            doc = multiclass_metrics(cm).as_dict()
            doc.pop("per_class", None)
            doc.pop("support", None)
        per_run.append(doc)
    keys = _scalar_fields(per_run[0])
    mean = {k: float(np.mean([r[k] for r in per_run])) for k in keys
            if not isinstance(keys[k], bool)}
    mean["degenerate_runs"] = sum(bool(r.get("degenerate")) for r in per_run)
    return MetricsReport(spec.name, repeats, per_run, mean, seeds)


def render_report_table(reports: list, multiclass: bool = False) -> str:
    """Aligned plain-text table: one row per method's averaged metrics."""
    if multiclass:
        cols = [("Pre.", "weighted_precision"), ("Rec.", "weighted_recall"),
                ("F1-macro", "macro_f1"), ("F1-micro", "micro_f1_nonmajority")]
    else:
        cols = [("Acc.", "accuracy"), ("Pre.", "precision"), ("Rec.", "recall"),
                ("Spec.", "specificity"), ("F1", "f1")]
    width = max([len("Method")] + [len(r.name) for r in reports]) + 2
    lines = ["Method".ljust(width) + "  ".join(h.rjust(8) for h, _ in cols)]
    for r in reports:
        cells = ["{:8.1f}".format(100.0 * r.mean.get(key, float("nan")))
                 for _, key in cols]
        lines.append(r.name.ljust(width) + "  ".join(cells))
    return "\n".join(lines)
