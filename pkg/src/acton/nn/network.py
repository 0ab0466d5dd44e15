"""Layer-stack assembly from a JSON-serializable architecture description.

The architecture JSON lists the embedding table size, the convolution
blocks (each: conv + ReLU -> average pool -> batch norm), the dense layer,
dropout, the elastic-net strengths, and one softmax head per task:

    {
      "vocab_size": 61, "embedding_dim": 16, "sequence_length": 336,
      "conv_blocks": [{"filters": 8, "kernel": 5, "pool": 4, "pool_stride": 4}],
      "dense_units": 32, "dropout": 0.5, "lambda1": 0.25, "lambda2": 0.25,
      "heads": {"apnea": 2}
    }

Every parameter tensor is initialized from its own seed substream keyed by
its name, so a model's weights do not depend on which *other* tensors
exist — a single-task model and a multi-task model share bit-identical
shared-layer and head initializations under the same seed.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from ..exceptions import DimensionMismatch
from .layers import AvgPool1D, BatchNorm, Conv1D, Dense, Dropout, EmbeddingLayer


@dataclass
class ConvBlockSpec:
    filters: int = 64
    kernel: int = 5
    pool: int = 4
    pool_stride: int | None = None   # None: stride = pool (downsampling)
    padding: int | None = None       # None: wide convolution (kernel - 1)


@dataclass
class NetworkSpec:
    vocab_size: int
    embedding_dim: int
    sequence_length: int
    conv_blocks: list = field(default_factory=lambda: [ConvBlockSpec()] * 3)
    dense_units: int = 64
    dropout: float = 0.5
    lambda1: float = 0.25
    lambda2: float = 0.25
    heads: dict = field(default_factory=dict)   # task name -> class count

    def to_json(self) -> str:
        doc = asdict(self)
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NetworkSpec":
        doc = json.loads(text)
        doc["conv_blocks"] = [ConvBlockSpec(**b) for b in doc.get("conv_blocks", [])]
        return cls(**doc)

    def flat_length(self) -> int:
        """Flattened feature count entering the dense layer."""
        length = self.sequence_length
        for block in self.conv_blocks:
            padding = block.kernel - 1 if block.padding is None else block.padding
            length = length + 2 * padding - block.kernel + 1
            stride = block.pool_stride or block.pool
            length = (length - block.pool) // stride + 1
            if length < 1:
                raise DimensionMismatch(
                    "conv/pool stack shrinks the sequence below one position"
                )
        return length * self.conv_blocks[-1].filters if self.conv_blocks else (
            self.sequence_length * self.embedding_dim)


def _init_rng(seed: int, name: str) -> np.random.Generator:
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=seed, spawn_key=(key,))))


def _uniform_init(seed: int, name: str, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return _init_rng(seed, name).uniform(-bound, bound, size=shape)


def build_head(spec: NetworkSpec, task: str, seed: int,
               n_classes: int | None = None) -> Dense:
    k = n_classes if n_classes is not None else spec.heads[task]
    w = _uniform_init(seed, f"head.{task}.W", (spec.dense_units, k), spec.dense_units)
    b = np.zeros(k)
    return Dense(w, b, activation="none")


class SharedEncoder:
    """Embedding -> (conv -> pool -> batchnorm) blocks -> dense -> dropout.

    The per-task softmax heads attach to this encoder's output; see
    :func:`build_head`.
    """

    def __init__(self, spec: NetworkSpec, seed: int,
                 pretrained_embedding: np.ndarray | None = None):
        self.spec = spec
        if pretrained_embedding is not None:
            table = np.array(pretrained_embedding, dtype=np.float64)
            if table.shape != (spec.vocab_size, spec.embedding_dim):
                raise DimensionMismatch(
                    f"pretrained table {table.shape} vs expected "
                    f"({spec.vocab_size}, {spec.embedding_dim})"
                )
        else:
            bound = 0.5 / spec.embedding_dim
            table = _init_rng(seed, "embedding.E").uniform(
                -bound, bound, size=(spec.vocab_size, spec.embedding_dim))
        self.embedding = EmbeddingLayer(table)

        self.blocks = []
        channels = spec.embedding_dim
        for i, block in enumerate(spec.conv_blocks):
            kd = block.kernel * channels
            conv = Conv1D(
                _uniform_init(seed, f"conv{i}.u", (kd, block.filters), kd),
                np.zeros(block.filters), block.kernel, padding=block.padding,
                activation="relu")
            pool = AvgPool1D(block.pool, block.pool_stride)
            bn = BatchNorm(block.filters)
            self.blocks.append((conv, pool, bn))
            channels = block.filters

        flat = spec.flat_length()
        self.dense = Dense(
            _uniform_init(seed, "dense.W", (flat, spec.dense_units), flat),
            np.zeros(spec.dense_units), activation="relu")
        self.dropout = Dropout(spec.dropout)

    # -- parameter plumbing ---------------------------------------------

    def named_layers(self) -> dict:
        out = {"embedding": self.embedding, "dense": self.dense}
        for i, (conv, _pool, bn) in enumerate(self.blocks):
            out[f"conv{i}"] = conv
            out[f"bn{i}"] = bn
        return out

    def params(self) -> dict:
        return {
            f"{layer_name}.{p}": arr
            for layer_name, layer in self.named_layers().items()
            for p, arr in layer.params().items()
        }

    def grads(self) -> dict:
        return {
            f"{layer_name}.{p}": arr
            for layer_name, layer in self.named_layers().items()
            for p, arr in layer.grads.items()
        }

    def zero_grads(self) -> None:
        for layer in self.named_layers().values():
            for g in layer.grads.values():
                g.fill(0.0)

    def running_stats(self) -> dict:
        out = {}
        for i, (_conv, _pool, bn) in enumerate(self.blocks):
            out[f"bn{i}.running_mean"] = bn.running_mean
            out[f"bn{i}.running_var"] = bn.running_var
        return out

    def load_running_stats(self, arrays: dict) -> None:
        for i, (_conv, _pool, bn) in enumerate(self.blocks):
            bn.running_mean = arrays[f"bn{i}.running_mean"].copy()
            bn.running_var = arrays[f"bn{i}.running_var"].copy()

    # -- computation -------------------------------------------------------

    def forward(self, ids: np.ndarray, train: bool = True,
                rng: np.random.Generator | None = None) -> np.ndarray:
        x = self.embedding.forward(ids)
        for conv, pool, bn in self.blocks:
            x = conv.forward(x)
            x = pool.forward(x)
            b, length, ch = x.shape
            x = bn.forward(x.reshape(b * length, ch), train=train).reshape(b, length, ch)
        b = x.shape[0]
        self._pre_flat_shape = x.shape
        z = self.dense.forward(x.reshape(b, -1))
        # no rng means dropout is bypassed (deterministic verification path)
        return self.dropout.forward(z, train=train and rng is not None, rng=rng)

    def backward(self, grad_z: np.ndarray) -> None:
        g = self.dropout.backward(grad_z)
        g = self.dense.backward(g)
        g = g.reshape(self._pre_flat_shape)
        for conv, pool, bn in reversed(self.blocks):
            b, length, ch = g.shape
            g = bn.backward(g.reshape(b * length, ch)).reshape(b, length, ch)
            g = pool.backward(g)
            g = conv.backward(g)
        self.embedding.backward(g)
