"""Classification loss: cross-entropy with an elastic-net penalty.

The penalty applies to the final (softmax head) weight matrix only:

    loss = -(1/B) sum_i log p_hat[i, gold_i] + (l2/2) ||W||^2 + l1 ||W||_1

The L1 subgradient uses sign(w), taken as 0 at w = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ShapeMismatch

PROB_FLOOR = 1e-12


@dataclass
class LossResult:
    loss: float
    grad_logits: np.ndarray        # (B, K); valid because softmax+CE fuse
    grad_penalty: np.ndarray       # dL/dW of the penalty term alone
    clamped: bool                  # a gold-class probability hit the floor


def cross_entropy_elasticnet(probs: np.ndarray, golds: np.ndarray,
                             weights: np.ndarray, l1: float = 0.0,
                             l2: float = 0.0) -> LossResult:
    probs = np.asarray(probs, dtype=np.float64)
    golds = np.asarray(golds)
    if probs.ndim != 2 or len(golds) != len(probs):
        raise ShapeMismatch(f"probs {probs.shape} vs {len(golds)} gold labels")
    batch = len(probs)
    gold_p = probs[np.arange(batch), golds]
    clamped = bool(np.any(gold_p < PROB_FLOOR))
    data = float(-np.mean(np.log(np.maximum(gold_p, PROB_FLOOR))))
    penalty = 0.5 * l2 * float(np.sum(weights * weights)) + l1 * float(np.abs(weights).sum())

    grad_logits = probs.copy()
    grad_logits[np.arange(batch), golds] -= 1.0
    grad_logits /= batch
    grad_penalty = l2 * weights + l1 * np.sign(weights)
    return LossResult(data + penalty, grad_logits, grad_penalty, clamped)
