"""One-vs-all logistic regression trained by plain seeded SGD.

Multi-class problems get one binary logistic model per class; prediction
is the argmax of the class scores (ties resolve to the lowest class id).
Kept deliberately free of closed-form solvers so the probe's behavior is
fully reproducible from (seed, epochs, learning rate).
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import SingleClassTrainingSet
from .._validation import as_float_matrix, check_finite


class LogisticProbe(BaseEstimator, ClassifierMixin):
    def __init__(self, lr: float = 0.1, l2: float = 1e-4, epochs: int = 100,
                 batch_size: int = 32, seed: int = 0):
        self.lr = lr
        self.l2 = l2
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, y):
        X = as_float_matrix(X)
        check_finite(X, "features")
        y = np.asarray(y, dtype=np.int64)
        classes = np.unique(y)
        if len(classes) < 2:
            raise SingleClassTrainingSet(
                f"training labels contain only class {classes.tolist()}"
            )
        n_classes = int(y.max()) + 1
        n, d = X.shape
        self.W_ = np.zeros((d, n_classes))
        self.b_ = np.zeros(n_classes)
        self.classes_ = np.arange(n_classes)
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y] = 1.0

        root = np.random.SeedSequence(self.seed)
        for key in root.spawn(self.epochs):
            rng = np.random.Generator(np.random.PCG64(key))
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                xb, tb = X[idx], onehot[idx]
                p = expit(xb @ self.W_ + self.b_)      # per-class binary fits
                g = (p - tb) / len(idx)
                self.W_ -= self.lr * (xb.T @ g + self.l2 * self.W_)
                self.b_ -= self.lr * g.sum(axis=0)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "W_")
        return as_float_matrix(X) @ self.W_ + self.b_

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def predict_proba(self, X):
        """Per-class sigmoid scores normalized to sum to one."""
        scores = expit(self.decision_function(X))
        total = scores.sum(axis=1, keepdims=True)
        return np.where(total > 0, scores / total, 1.0 / scores.shape[1])
