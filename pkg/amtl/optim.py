"""
Optimiser and learning-rate schedule.

AdamW keeps per-parameter moments and step counts, and skips any parameter
whose ``.grad`` is None. A frozen parameter (no gradient this step) is
therefore left bit-identical, weight decay included.
"""

import math
from typing import Dict, Iterable, List, Tuple

import numpy as np

from amtl.tensor import Tensor

NamedParams = Iterable[Tuple[str, Tensor]]


class AdamW:
    """Adam with decoupled weight decay; decay applies to matrices only."""

    def __init__(
        self,
        params: NamedParams,
        lr: float,
        weight_decay: float = 0.01,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params: List[Tuple[str, Tensor]] = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.t: Dict[str, int] = {}

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.zero_grad()

    def step(self, lr: float | None = None) -> int:
        """
        Apply one update at learning rate ``lr`` (the base rate when omitted).

        Returns:
            Number of parameters updated
        """
        lr = self.lr if lr is None else lr
        updated = 0
        for name, p in self.params:
            if p.grad is None:
                continue
            g = p.grad
            t = self.t.get(name, 0) + 1
            m = self.beta1 * self.m.get(name, 0.0) + (1 - self.beta1) * g
            v = self.beta2 * self.v.get(name, 0.0) + (1 - self.beta2) * g * g
            self.t[name], self.m[name], self.v[name] = t, m, v
            m_hat = m / (1 - self.beta1**t)
            v_hat = v / (1 - self.beta2**t)
            if self.weight_decay and p.ndim >= 2:
                p.data = p.data - lr * self.weight_decay * p.data
            p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)
            updated += 1
        return updated


def clip_grad_norm(params: Iterable[Tensor], max_norm: float) -> float:
    """
    Scale gradients so their global L2 norm is at most ``max_norm``.

    Returns:
        The norm before clipping; 0 disables clipping
    """
    params = list(params)
    grads = [p.grad for p in params if p.grad is not None]
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


class LinearWarmupDecay:
    """
    Linear warmup from 0 to the base rate, then linear decay to 0.

    ``warmup`` is the configured step count capped at ``ceil(fraction * total)``,
    so a small run is not spent entirely in warmup.
    """

    def __init__(self, base_lr: float, total_steps: int, warmup_steps: int, fraction: float = 1.0):
        self.base_lr = base_lr
        self.total = max(1, total_steps)
        self.warmup = min(warmup_steps, math.ceil(fraction * self.total))

    def __call__(self, step: int) -> float:
        """Learning rate for the 1-based ``step``."""
        if self.warmup and step <= self.warmup:
            return self.base_lr * step / self.warmup
        remaining = self.total - self.warmup
        if remaining <= 0:
            return self.base_lr
        return self.base_lr * max(0.0, (self.total - step) / remaining)


def frozen_copy(params: NamedParams) -> Dict[str, np.ndarray]:
    """Snapshot of parameter values, for freeze checks."""
    return {name: p.data.copy() for name, p in params}
