"""Constant and random reference predictors."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted


class MajorityBaseline(BaseEstimator, ClassifierMixin):
    """Always predicts the most frequent training class (tie: lowest id)."""

    def fit(self, X, y):
        y = np.asarray(y)
        counts = np.bincount(y)
        self.majority_class_ = int(np.argmax(counts))
        self.classes_ = np.arange(len(counts))
        return self

    def predict(self, X):
        check_is_fitted(self, "majority_class_")
        return np.full(len(X), self.majority_class_, dtype=np.int64)


class RandomBaseline(BaseEstimator, ClassifierMixin):
    """Uniform seeded draws over the classes seen in training."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def fit(self, X, y):
        y = np.asarray(y)
        self.n_classes_ = int(y.max()) + 1
        self.classes_ = np.arange(self.n_classes_)
        return self

    def predict(self, X):
        check_is_fitted(self, "n_classes_")
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))
        return rng.integers(0, self.n_classes_, size=len(X))
