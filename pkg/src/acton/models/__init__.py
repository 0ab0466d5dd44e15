"""Classifier heads: baselines, linear probes, and convolutional models."""

from .baselines import MajorityBaseline, RandomBaseline
from .linear import LogisticProbe
from .convnet import (
    DEFAULT_DEPTHS,
    MULTITASK_ALPHAS,
    MULTITASK_ALPHAS_PRETRAINED,
    ConvNetClassifier,
    MultiTaskConvNet,
    TaskSpec,
    multitask_loss,
)

__all__ = [
    "ConvNetClassifier",
    "DEFAULT_DEPTHS",
    "LogisticProbe",
    "MajorityBaseline",
    "MULTITASK_ALPHAS",
    "MULTITASK_ALPHAS_PRETRAINED",
    "MultiTaskConvNet",
    "RandomBaseline",
    "TaskSpec",
    "multitask_loss",
]
