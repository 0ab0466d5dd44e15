"""Activity time-series embeddings and disorder classifiers.

The package learns unsupervised vector representations of wearable
actigraphy sequences at a configurable time granularity (device sample,
hour, day, or week) and feeds them to linear and convolutional disorder
classifiers, including a shared-encoder multi-task variant that exploits
correlated (co-morbid) labels. A deterministic synthetic cohort generator
provides a desk-scale testbed.
"""

from .core import (
    ActivitySequence,
    Granularity,
    LabelRecord,
    TASK_CLASSES,
    TASK_NAMES,
    TimeSegment,
    Vocabulary,
    concat_features,
    segment_corpus,
    segment_sequence,
)
from .ingest import (
    Dataset,
    build_vocabulary,
    high_missing_subjects,
    merge_datasets,
    parse_activity_csv,
    parse_labels_csv,
    reencode,
    resolve_oov,
)
from .synthgen import ArchetypeSpec, SynthConfig, generate_cohort, label_correlation
from .embedding import (
    ActivityEmbedder,
    EmbeddingSpace,
    NoiseTable,
    TrainConfig,
    build_noise_table,
    infer_sequence,
    sequence_features,
    train_embeddings,
)
from .models import (
    ConvNetClassifier,
    LogisticProbe,
    MajorityBaseline,
    MultiTaskConvNet,
    RandomBaseline,
    TaskSpec,
    multitask_loss,
)
from .evaluation import (
    ExperimentSpec,
    MetricsReport,
    binary_metrics,
    confusion,
    multiclass_metrics,
    render_report_table,
    run_protocol,
    split_subjects,
)
from .persist import (
    load_checkpoint,
    load_embeddings,
    save_checkpoint,
    save_embeddings,
    write_activity_csv,
    write_labels_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityEmbedder", "ActivitySequence", "ArchetypeSpec", "ConvNetClassifier",
    "Dataset", "EmbeddingSpace", "ExperimentSpec", "Granularity", "LabelRecord",
    "LogisticProbe", "MajorityBaseline", "MetricsReport", "MultiTaskConvNet",
    "NoiseTable", "RandomBaseline", "SynthConfig",
    "TASK_CLASSES", "TASK_NAMES", "TaskSpec", "TimeSegment", "TrainConfig",
    "Vocabulary", "binary_metrics", "build_noise_table", "build_vocabulary",
    "concat_features", "confusion", "generate_cohort", "high_missing_subjects",
    "infer_sequence", "label_correlation", "load_checkpoint", "load_embeddings",
    "merge_datasets", "multiclass_metrics", "multitask_loss",
    "parse_activity_csv", "parse_labels_csv", "reencode", "render_report_table",
    "resolve_oov", "run_protocol", "save_checkpoint", "save_embeddings",
    "segment_corpus", "segment_sequence", "sequence_features", "split_subjects",
    "train_embeddings", "write_activity_csv", "write_labels_csv",
]
