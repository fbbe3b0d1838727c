"""
Encoder building blocks on top of the numeric core.

Modules register parameters and submodules as attributes; ``named_parameters``
walks them in registration order, which is also the checkpoint order.
"""

import math
from typing import Dict, Iterator, List, Tuple

import numpy as np

from amtl.tensor import DTYPE, Parameter, Tensor, dropout, embedding, layer_norm, softmax


class Module:
    """Parameter container with a train/eval switch."""

    def __init__(self):
        self._params: Dict[str, Parameter] = {}
        self._modules: Dict[str, "Module"] = {}
        self.training = True

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self.__dict__.setdefault("_params", {})[name] = value
        elif isinstance(value, Module):
            self.__dict__.setdefault("_modules", {})[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, module in self._modules.items():
            yield from module.named_parameters(prefix + name + ".")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for module in self._modules.values():
            module.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)


def _normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    return rng.normal(0.0, std, size=shape).astype(DTYPE)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, std: float):
        super().__init__()
        self.weight = Parameter(_normal(rng, (n_in, n_out), std))
        self.bias = Parameter(np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class LayerNorm(Module):
    def __init__(self, width: int):
        super().__init__()
        self.gamma = Parameter(np.ones(width))
        self.beta = Parameter(np.zeros(width))

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta)


class Embedding(Module):
    def __init__(self, rows: int, width: int, rng: np.random.Generator, std: float):
        super().__init__()
        self.weight = Parameter(_normal(rng, (rows, width), std))

    def __call__(self, ids: np.ndarray) -> Tensor:
        return embedding(self.weight, ids)


class SelfAttention(Module):
    """Multi-head scaled dot-product self-attention with a key padding mask."""

    def __init__(self, hidden: int, heads: int, dropout_rate: float, rng, std: float):
        super().__init__()
        self.heads, self.head_dim = heads, hidden // heads
        self.query = Linear(hidden, hidden, rng, std)
        self.key = Linear(hidden, hidden, rng, std)
        self.value = Linear(hidden, hidden, rng, std)
        self.output = Linear(hidden, hidden, rng, std)
        self.dropout_rate = dropout_rate
        self.rng = rng

    def _split(self, x: Tensor, b: int, t: int) -> Tensor:
        return x.reshape(b, t, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    def __call__(self, x: Tensor, key_bias: np.ndarray) -> Tensor:
        b, t, hidden = x.shape
        q = self._split(self.query(x), b, t)
        k = self._split(self.key(x), b, t)
        v = self._split(self.value(x), b, t)
        scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(self.head_dim)) + key_bias
        weights = dropout(softmax(scores, axis=-1), self.dropout_rate, self.rng, self.training)
        context = (weights @ v).transpose(0, 2, 1, 3).reshape(b, t, hidden)
        return self.output(context)


class EncoderLayer(Module):
    """Post-norm transformer block: attention and feed-forward, each residual."""

    def __init__(self, hidden: int, heads: int, ffn: int, dropout_rate: float, rng, std: float):
        super().__init__()
        self.attention = SelfAttention(hidden, heads, dropout_rate, rng, std)
        self.attention_norm = LayerNorm(hidden)
        self.ffn_in = Linear(hidden, ffn, rng, std)
        self.ffn_out = Linear(ffn, hidden, rng, std)
        self.ffn_norm = LayerNorm(hidden)
        self.dropout_rate = dropout_rate
        self.rng = rng

    def __call__(self, x: Tensor, key_bias: np.ndarray) -> Tensor:
        attended = dropout(self.attention(x, key_bias), self.dropout_rate, self.rng, self.training)
        x = self.attention_norm(x + attended)
        inner = self.ffn_in(x).tanh()
        projected = dropout(self.ffn_out(inner), self.dropout_rate, self.rng, self.training)
        return self.ffn_norm(x + projected)
