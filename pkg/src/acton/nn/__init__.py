"""From-scratch differentiable layers with exact hand-derived backward passes."""

from .layers import (
    AvgPool1D,
    BatchNorm,
    Conv1D,
    Dense,
    Dropout,
    EmbeddingLayer,
    relu,
    softmax,
)
from .losses import cross_entropy_elasticnet
from .optim import Adam, AdamState, adam_step
from .gradcheck import GradCheckReport, finite_difference_check, gradient_check
from .network import ConvBlockSpec, NetworkSpec, SharedEncoder, build_head

__all__ = [
    "Adam",
    "AdamState",
    "AvgPool1D",
    "BatchNorm",
    "Conv1D",
    "ConvBlockSpec",
    "Dense",
    "Dropout",
    "EmbeddingLayer",
    "GradCheckReport",
    "NetworkSpec",
    "SharedEncoder",
    "adam_step",
    "build_head",
    "cross_entropy_elasticnet",
    "finite_difference_check",
    "gradient_check",
    "relu",
    "softmax",
]
