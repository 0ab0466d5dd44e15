"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FD_STEP = 1e-5


@dataclass
class GradCheckReport:
    max_relative_error: float
    worst_param: str
    per_param: dict

    def passed(self, tolerance: float) -> bool:
        return self.max_relative_error < tolerance


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def finite_difference_check(loss_fn, params: dict, analytic: dict,
                            step: float = FD_STEP) -> GradCheckReport:
    """Compare analytic gradients against central differences.

    ``loss_fn`` re-evaluates the scalar loss from the (mutated-in-place)
    parameter arrays; every element of every parameter is perturbed.
    """
    per_param = {}
    worst, worst_name = 0.0, ""
    for name, param in params.items():
        numeric = np.zeros_like(param)
        flat = param.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn()
            flat[i] = orig - step
            down = loss_fn()
            flat[i] = orig
            num_flat[i] = (up - down) / (2.0 * step)
        err = _relative_error(np.asarray(analytic[name]), numeric)
        per_param[name] = err
        if err > worst:
            worst, worst_name = err, name
    return GradCheckReport(worst, worst_name, per_param)


def gradient_check(model, ids: np.ndarray, golds, step: float = FD_STEP) -> GradCheckReport:
    """Check every parameter of a classifier model on one batch.

    The model must expose ``loss_and_grads(ids, golds)`` returning
    (scalar loss, grads dict) and ``params()``; dropout should be disabled
    and batch statistics are recomputed per evaluation, which keeps the
    loss a deterministic function of the parameters.
    """
    _, analytic = model.loss_and_grads(ids, golds)
    analytic = {name: np.array(g) for name, g in analytic.items()}
    params = model.params()
    return finite_difference_check(
        lambda: model.loss_and_grads(ids, golds)[0], params, analytic, step=step)
