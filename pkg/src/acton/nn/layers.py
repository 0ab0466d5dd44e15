"""Differentiable building blocks over plain float64 numpy arrays.

Every layer caches what its backward pass needs during ``forward`` and
returns the gradient with respect to its input from ``backward``,
accumulating parameter gradients in ``self.grads``. Shapes:

* embedding lookup: ids (B, n) -> (B, n, d)
* 1-D convolution: (B, n, channels) -> (B, n + 2*padding - kernel + 1, filters)
* average pooling: (B, L, channels) -> (B, (L - window)//stride + 1, channels)
* batch norm / dense / dropout: (rows, features) -> (rows, features)
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import (
    BatchTooSmall,
    IdOutOfRange,
    ShapeMismatch,
    WindowTooLarge,
)

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max for stability."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class EmbeddingLayer:
    """Trainable id -> vector lookup; backward accumulates into touched rows."""

    def __init__(self, table: np.ndarray):
        self.E = np.asarray(table, dtype=np.float64)
        self.grads = {"E": np.zeros_like(self.E)}
        self._ids = None

    def params(self) -> dict:
        return {"E": self.E}

    def forward(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids)
        if ids.size and (ids.min() < 0 or ids.max() >= len(self.E)):
            raise IdOutOfRange(
                f"ids outside [0, {len(self.E)}): saw [{ids.min()}, {ids.max()}]"
            )
        self._ids = ids
        return self.E[ids]

    def backward(self, grad_out: np.ndarray) -> None:
        d = self.E.shape[1]
        np.add.at(self.grads["E"], self._ids.ravel(), grad_out.reshape(-1, d))
        return None


class Conv1D:
    """Wide 1-D convolution (+ optional ReLU) over (B, n, channels) input.

    Filters span ``kernel`` consecutive positions of all channels; zero
    padding of ``padding`` (default kernel-1) lets filters cover sequence
    boundaries, giving n + 2*padding - kernel + 1 output positions.
    """

    def __init__(self, weight: np.ndarray, bias: np.ndarray, kernel: int,
                 padding: int | None = None, activation: str = "relu"):
        kd, n_filters = weight.shape
        if kd % kernel != 0:
            raise ShapeMismatch(f"weight rows {kd} not a multiple of kernel {kernel}")
        self.kernel = kernel
        self.channels = kd // kernel
        self.padding = kernel - 1 if padding is None else padding
        self.activation = activation
        self.u = np.asarray(weight, dtype=np.float64)
        self.b = np.asarray(bias, dtype=np.float64)
        self.grads = {"u": np.zeros_like(self.u), "b": np.zeros_like(self.b)}
        self._cache = None

    def params(self) -> dict:
        return {"u": self.u, "b": self.b}

    @property
    def n_filters(self) -> int:
        return self.u.shape[1]

    def output_length(self, n: int) -> int:
        return n + 2 * self.padding - self.kernel + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.channels:
            raise ShapeMismatch(
                f"expected (B, n, {self.channels}) input, got {x.shape}"
            )
        o = self.padding
        xp = np.pad(x, ((0, 0), (o, o), (0, 0))) if o else x
        windows = sliding_window_view(xp, self.kernel, axis=1)  # (B, n_out, c, k)
        windows = np.ascontiguousarray(windows.transpose(0, 1, 3, 2))
        flat = windows.reshape(x.shape[0], -1, self.kernel * self.channels)
        z = flat @ self.u + self.b
        self._cache = (x.shape, flat, z)
        return relu(z) if self.activation == "relu" else z

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x_shape, flat, z = self._cache
        dz = grad_out * (z > 0.0) if self.activation == "relu" else grad_out
        kd = self.kernel * self.channels
        self.grads["u"] += flat.reshape(-1, kd).T @ dz.reshape(-1, self.n_filters)
        self.grads["b"] += dz.sum(axis=(0, 1))
        b, n, c = x_shape
        o = self.padding
        dxp = np.zeros((b, n + 2 * o, c))
        w = self.u.reshape(self.kernel, c, self.n_filters)
        n_out = dz.shape[1]
        for j in range(self.kernel):
            dxp[:, j:j + n_out, :] += dz @ w[j].T
        return dxp[:, o:o + n, :] if o else dxp


class AvgPool1D:
    """Average pooling along the time axis of (B, L, channels)."""

    def __init__(self, window: int, stride: int | None = None):
        if window < 1:
            raise ValueError("pooling window must be positive")
        self.window = window
        self.stride = window if stride is None else stride
        self._in_shape = None

    def params(self) -> dict:
        return {}

    def output_length(self, length: int) -> int:
        if self.window > length:
            raise WindowTooLarge(
                f"pool window {self.window} exceeds map length {length}"
            )
        return (length - self.window) // self.stride + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        n_out = self.output_length(x.shape[1])
        self._in_shape = x.shape
        windows = sliding_window_view(x, self.window, axis=1)[:, ::self.stride]
        return windows[:, :n_out].mean(axis=-1)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        dx = np.zeros(self._in_shape)
        spread = grad_out / self.window
        starts = np.arange(grad_out.shape[1]) * self.stride
        for j in range(self.window):
            dx[:, starts + j, :] += spread
        return dx


class BatchNorm:
    """Per-feature normalization over rows of a (rows, features) matrix.

    Training mode normalizes by batch statistics and refreshes running
    averages; eval mode normalizes by the running averages. The backward
    pass is the full derivative including the mean/variance paths.
    """

    def __init__(self, n_features: int, eps: float = BN_EPS, momentum: float = BN_MOMENTUM):
        self.gamma = np.ones(n_features)
        self.beta = np.zeros(n_features)
        self.running_mean = np.zeros(n_features)
        self.running_var = np.ones(n_features)
        self.eps = eps
        self.momentum = momentum
        self.grads = {"gamma": np.zeros_like(self.gamma), "beta": np.zeros_like(self.beta)}
        self._cache = None

    def params(self) -> dict:
        return {"gamma": self.gamma, "beta": self.beta}

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != len(self.gamma):
            raise ShapeMismatch(f"expected (rows, {len(self.gamma)}), got {x.shape}")
        if train:
            if x.shape[0] < 2:
                raise BatchTooSmall("batch normalization needs >= 2 rows in train mode")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, train)
        return self.gamma * xhat + self.beta

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        xhat, inv_std, train = self._cache
        self.grads["gamma"] += (grad_out * xhat).sum(axis=0)
        self.grads["beta"] += grad_out.sum(axis=0)
        dxhat = grad_out * self.gamma
        if not train:
            return dxhat * inv_std
        rows = xhat.shape[0]
        return (inv_std / rows) * (
            rows * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
        )


class Dropout:
    """Inverted dropout: train zeroes units w.p. p, scales survivors by 1/(1-p)."""

    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise ValueError("dropout probability must be in [0, 1)")
        self.p = p
        self._mask = None

    def params(self) -> dict:
        return {}

    def forward(self, x: np.ndarray, train: bool = True,
                rng: np.random.Generator | None = None) -> np.ndarray:
        if not train or self.p == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        self._mask = (rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * self._mask

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return grad_out
        return grad_out * self._mask


class Dense:
    """Affine map with optional ReLU over (rows, in_features)."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray, activation: str = "none"):
        self.W = np.asarray(weight, dtype=np.float64)
        self.b = np.asarray(bias, dtype=np.float64)
        self.activation = activation
        self.grads = {"W": np.zeros_like(self.W), "b": np.zeros_like(self.b)}
        self._cache = None

    def params(self) -> dict:
        return {"W": self.W, "b": self.b}

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.W.shape[0]:
            raise ShapeMismatch(
                f"expected (rows, {self.W.shape[0]}) input, got {x.shape}"
            )
        z = x @ self.W + self.b
        self._cache = (x, z)
        return relu(z) if self.activation == "relu" else z

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x, z = self._cache
        dz = grad_out * (z > 0.0) if self.activation == "relu" else grad_out
        self.grads["W"] += x.T @ dz
        self.grads["b"] += dz.sum(axis=0)
        return dz @ self.W.T
