"""Unsupervised segment-level embedding learner for activity sequences."""

from .space import EmbeddingSpace, NoiseTable, TrainConfig, build_noise_table
from .losses import (
    loss_grad_neighbor,
    loss_grad_segment,
    loss_grad_smoothing,
    sgns_loss_grads,
)
from .train import (
    EpochStats,
    infer_sequence,
    sequence_features,
    train_embeddings,
)
from .estimator import ActivityEmbedder

__all__ = [
    "ActivityEmbedder",
    "EmbeddingSpace",
    "EpochStats",
    "NoiseTable",
    "TrainConfig",
    "build_noise_table",
    "infer_sequence",
    "loss_grad_neighbor",
    "loss_grad_segment",
    "loss_grad_smoothing",
    "sequence_features",
    "sgns_loss_grads",
    "train_embeddings",
]
