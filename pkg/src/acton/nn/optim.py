"""Adam optimizer with per-parameter moment state."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ShapeMismatch


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def like(cls, param: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(param), np.zeros_like(param))


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState,
              lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One in-place Adam update with bias-corrected moments."""
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ShapeMismatch(
            f"param {param.shape}, grad {grad.shape}, state {state.m.shape}"
        )
    state.step += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** state.step)
    v_hat = state.v / (1.0 - beta2 ** state.step)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass
class Adam:
    """Keeps one :class:`AdamState` per named parameter."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    states: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict) -> None:
        for name in params:
            if name not in self.states:
                self.states[name] = AdamState.like(params[name])
            adam_step(params[name], grads[name], self.states[name],
                      lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps)

    def state_arrays(self) -> dict:
        """Flatten states for checkpointing."""
        out = {}
        for name, st in self.states.items():
            out[f"{name}.m"] = st.m
            out[f"{name}.v"] = st.v
            out[f"{name}.step"] = np.array(st.step, dtype=np.int64)
        return out

    def load_state_arrays(self, arrays: dict) -> None:
        names = {k[:-2] for k in arrays if k.endswith(".m")}
        self.states = {
            name: AdamState(arrays[f"{name}.m"].copy(), arrays[f"{name}.v"].copy(),
                            int(arrays[f"{name}.step"]))
            for name in names
        }
