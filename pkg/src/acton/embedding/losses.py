"""Loss values and exact gradients for the three training objectives.

All three share one parameter layout: a segment (or symbol) input vector
and rows of an output-weight table. The binary negative-sampling objective
for a positive output row w_+ and negative rows w_m is

    loss = -log sigmoid(w_+ . v) - sum_m log sigmoid(-w_m . v)

computed here in the stable softplus form. The smoothing objective
penalizes squared distance between a segment vector and its neighbors and
only ever moves the center vector; neighbors receive their own updates
when they are visited.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def sgns_loss_grads(center: np.ndarray, output_rows: np.ndarray):
    """Negative-sampling loss and gradients for one positive/negatives group.

    ``output_rows[0]`` is the positive row; the rest are noise draws.
    Returns (loss, d_center, d_rows) where d_rows aligns with output_rows.
    """
    scores = output_rows @ center
    loss = float(np.logaddexp(0.0, -scores[0]) + np.logaddexp(0.0, scores[1:]).sum())
    coef = expit(scores)
    coef[0] -= 1.0
    grad_center = coef @ output_rows
    grad_rows = coef[:, None] * center
    return loss, grad_center, grad_rows


def _grads_by_id(ids, grad_rows) -> dict:
    """Sum row gradients per output id (noise draws can repeat an id)."""
    out: dict[int, np.ndarray] = {}
    for i, grad in zip(ids, grad_rows):
        i = int(i)
        if i in out:
            out[i] = out[i] + grad
        else:
            out[i] = grad
    return out


def loss_grad_segment(space, segment_id: int, target_symbol: int, negative_symbols):
    """Loss/gradients for a segment vector predicting one of its symbols.

    Returns (loss, gradient wrt the segment vector, {symbol id: gradient
    wrt that output-weight row}).
    """
    center = space.segment_vectors[segment_id]
    ids = [int(target_symbol), *map(int, negative_symbols)]
    rows = space.symbol_out_weights[ids]
    loss, grad_center, grad_rows = sgns_loss_grads(center, rows)
    return loss, grad_center, _grads_by_id(ids, grad_rows)


def loss_grad_neighbor(space, segment_id: int, neighbor_id: int, negative_segments):
    """Loss/gradients for a segment vector predicting an adjacent segment id."""
    center = space.segment_vectors[segment_id]
    ids = [int(neighbor_id), *map(int, negative_segments)]
    rows = space.segment_out_weights[ids]
    loss, grad_center, grad_rows = sgns_loss_grads(center, rows)
    return loss, grad_center, _grads_by_id(ids, grad_rows)


def loss_grad_smoothing(space, segment_id: int, neighbor_ids, eta: float):
    """Squared-distance pull of a segment vector toward its neighbors.

    loss = (eta/|N|) * sum_c ||v_k - v_c||^2, gradient wrt v_k only. An
    empty neighbor set (or eta = 0) contributes exactly zero.
    """
    center = space.segment_vectors[segment_id]
    neighbor_ids = list(neighbor_ids)
    if eta == 0.0 or not neighbor_ids:
        return 0.0, np.zeros_like(center)
    diffs = center[None, :] - space.segment_vectors[neighbor_ids]
    scale = eta / len(neighbor_ids)
    loss = float(scale * np.sum(diffs * diffs))
    grad_center = 2.0 * scale * diffs.sum(axis=0)
    return loss, grad_center
