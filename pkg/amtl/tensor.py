"""
AMTL Numeric Core

A small reverse-mode automatic differentiation engine over float64 numpy
arrays. Only the operations the encoder, heads and objectives need are
provided; each is a Function subclass with an explicit backward.

Gradients accumulate on leaf tensors created with ``requires_grad=True``
(parameters). Intermediate results carry no ``.grad``; ``backward`` keeps
their adjoints in a local table for the duration of one call.
"""

import threading
from contextlib import contextmanager
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from amtl.errors import ContractError, InvalidInputError

DTYPE = np.float64

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording on the current thread."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tensor:
    """Dense float64 array with an optional autograd history."""

    __slots__ = ("data", "requires_grad", "grad", "_ctx", "name")

    # ndarray <op> Tensor must defer to the Tensor's reflected operator.
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, _ctx: Optional["Function"] = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._ctx = _ctx
        self.name = ""

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    # Operators

    def __add__(self, other):
        return Add.apply(self, other)

    def __radd__(self, other):
        return Add.apply(other, self)

    def __sub__(self, other):
        return Add.apply(self, Neg.apply(other))

    def __rsub__(self, other):
        return Add.apply(other, Neg.apply(self))

    def __neg__(self):
        return Neg.apply(self)

    def __mul__(self, other):
        return Mul.apply(self, other)

    def __rmul__(self, other):
        return Mul.apply(other, self)

    def __truediv__(self, other):
        return Mul.apply(self, Reciprocal.apply(other))

    def __rtruediv__(self, other):
        return Mul.apply(other, Reciprocal.apply(self))

    def __pow__(self, exponent: float):
        return Pow.apply(self, exponent=float(exponent))

    def __matmul__(self, other):
        return MatMul.apply(self, other)

    def __getitem__(self, index):
        return GetItem.apply(self, index=index)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.data.size if axis is None else np.prod([self.shape[a] for a in _axes(axis)])
        return Sum.apply(self, axis=axis, keepdims=keepdims) * (1.0 / float(count))

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)

    def transpose(self, *axes) -> "Tensor":
        return Transpose.apply(self, axes=axes or None)

    def exp(self) -> "Tensor":
        return Exp.apply(self)

    def log(self) -> "Tensor":
        return Log.apply(self)

    def tanh(self) -> "Tensor":
        return Tanh.apply(self)

    def sigmoid(self) -> "Tensor":
        return Sigmoid.apply(self)


class Parameter(Tensor):
    """Leaf tensor that always requires a gradient."""

    __slots__ = ()

    def __init__(self, data, name: str = ""):
        super().__init__(np.array(data, dtype=DTYPE), requires_grad=True)
        self.name = name


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _axes(axis) -> Tuple[int, ...]:
    return (axis,) if isinstance(axis, int) else tuple(axis)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, dim in enumerate(shape):
        if dim == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


class Function:
    """One recorded operation: forward on arrays, backward on adjoints."""

    def __init__(self):
        self.parents: List[Tensor] = []
        self.kwargs = {}

    @classmethod
    def apply(cls, *args, **kwargs) -> Tensor:
        ctx = cls()
        parents = [as_tensor(arg) for arg in args]
        ctx.kwargs = kwargs
        out = ctx.forward(*[p.data for p in parents], **kwargs)
        requires_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
        if not requires_grad:
            return Tensor(out)
        ctx.parents = parents
        return Tensor(out, requires_grad=True, _ctx=ctx)

    def forward(self, *arrays, **kwargs) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        raise NotImplementedError


class Add(Function):
    def forward(self, x, y):
        self.shapes = (x.shape, y.shape)
        return x + y

    def backward(self, grad):
        return unbroadcast(grad, self.shapes[0]), unbroadcast(grad, self.shapes[1])


class Neg(Function):
    def forward(self, x):
        return -x

    def backward(self, grad):
        return (-grad,)


class Mul(Function):
    def forward(self, x, y):
        self.x, self.y = x, y
        return x * y

    def backward(self, grad):
        return unbroadcast(grad * self.y, self.x.shape), unbroadcast(grad * self.x, self.y.shape)


class Reciprocal(Function):
    def forward(self, x):
        self.out = 1.0 / x
        return self.out

    def backward(self, grad):
        return (-grad * self.out * self.out,)


class Pow(Function):
    def forward(self, x, exponent):
        self.x = x
        return x**exponent

    def backward(self, grad):
        p = self.kwargs["exponent"]
        return (grad * p * self.x ** (p - 1.0),)


class MatMul(Function):
    def forward(self, x, y):
        if x.ndim < 2 or y.ndim < 2:
            raise ContractError("matmul operands must have at least two dimensions")
        self.x, self.y = x, y
        return np.matmul(x, y)

    def backward(self, grad):
        gx = np.matmul(grad, np.swapaxes(self.y, -1, -2))
        gy = np.matmul(np.swapaxes(self.x, -1, -2), grad)
        return unbroadcast(gx, self.x.shape), unbroadcast(gy, self.y.shape)


class Sum(Function):
    def forward(self, x, axis=None, keepdims=False):
        self.shape = x.shape
        return np.sum(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        axis, keepdims = self.kwargs.get("axis"), self.kwargs.get("keepdims", False)
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis=_axes(axis))
        return (np.broadcast_to(grad, self.shape).copy(),)


class Reshape(Function):
    def forward(self, x, shape):
        self.shape = x.shape
        return np.reshape(x, shape)

    def backward(self, grad):
        return (np.reshape(grad, self.shape),)


class Transpose(Function):
    def forward(self, x, axes=None):
        return np.transpose(x, axes)

    def backward(self, grad):
        axes = self.kwargs.get("axes")
        if axes is None:
            return (np.transpose(grad),)
        return (np.transpose(grad, np.argsort(axes)),)


class GetItem(Function):
    def forward(self, x, index):
        self.shape = x.shape
        return x[index]

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=DTYPE)
        np.add.at(full, self.kwargs["index"], grad)
        return (full,)


class Exp(Function):
    def forward(self, x):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, x):
        self.x = x
        return np.log(x)

    def backward(self, grad):
        return (grad / self.x,)


class Tanh(Function):
    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out**2),)


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Sigmoid(Function):
    def forward(self, x):
        self.out = _stable_sigmoid(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class LogSigmoid(Function):
    """log(sigmoid(x)) without forming sigmoid(x)."""

    def forward(self, x):
        self.x = x
        return -np.logaddexp(0.0, -x)

    def backward(self, grad):
        return (grad * _stable_sigmoid(-self.x),)


class Softmax(Function):
    def forward(self, x, axis=-1):
        shifted = x - np.max(x, axis=axis, keepdims=True)
        e = np.exp(shifted)
        self.out = e / np.sum(e, axis=axis, keepdims=True)
        return self.out

    def backward(self, grad):
        axis = self.kwargs.get("axis", -1)
        inner = np.sum(grad * self.out, axis=axis, keepdims=True)
        return (self.out * (grad - inner),)


class LogSumExp(Function):
    def forward(self, x, axis=-1, keepdims=False):
        m = np.max(x, axis=axis, keepdims=True)
        e = np.exp(x - m)
        s = np.sum(e, axis=axis, keepdims=True)
        self.probs = e / s
        out = m + np.log(s)
        return out if keepdims else np.squeeze(out, axis=axis)

    def backward(self, grad):
        axis, keepdims = self.kwargs.get("axis", -1), self.kwargs.get("keepdims", False)
        if not keepdims:
            grad = np.expand_dims(grad, axis=axis)
        return (grad * self.probs,)


class LayerNorm(Function):
    """Normalise over the last axis, then scale and shift."""

    def forward(self, x, gamma, beta, eps=1e-5):
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        self.inv_std = 1.0 / np.sqrt(var + eps)
        self.xhat = (x - mu) * self.inv_std
        self.gamma = gamma
        self.x_shape, self.g_shape = x.shape, gamma.shape
        return self.xhat * gamma + beta

    def backward(self, grad):
        n = self.x_shape[-1]
        gxhat = grad * self.gamma
        gx = (self.inv_std / n) * (
            n * gxhat
            - gxhat.sum(axis=-1, keepdims=True)
            - self.xhat * (gxhat * self.xhat).sum(axis=-1, keepdims=True)
        )
        ggamma = unbroadcast(grad * self.xhat, self.g_shape)
        gbeta = unbroadcast(grad, self.g_shape)
        return gx, ggamma, gbeta


class Embedding(Function):
    """Row lookup ``weight[ids]``; ids are not differentiable."""

    def forward(self, weight, ids):
        self.shape = weight.shape
        return weight[ids]

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=DTYPE)
        np.add.at(full, self.kwargs["ids"], grad)
        return (full,)


def _check_finite(x: Tensor, op: str) -> None:
    if not np.all(np.isfinite(x.data)):
        raise InvalidInputError(f"{op}: input contains non-finite values")


def softmax(v, axis: int = -1) -> Tensor:
    """
    Numerically stabilised softmax.

    Raises:
        InvalidInputError: If any input is non-finite
    """
    v = as_tensor(v)
    _check_finite(v, "softmax")
    return Softmax.apply(v, axis=axis)


def log_softmax(v, axis: int = -1) -> Tensor:
    v = as_tensor(v)
    return v - LogSumExp.apply(v, axis=axis, keepdims=True)


def logsumexp(v, axis: int = -1, keepdims: bool = False) -> Tensor:
    return LogSumExp.apply(as_tensor(v), axis=axis, keepdims=keepdims)


def sigmoid(v) -> Tensor:
    return Sigmoid.apply(as_tensor(v))


def log_sigmoid(v) -> Tensor:
    return LogSigmoid.apply(as_tensor(v))


def tanh(v) -> Tensor:
    return Tanh.apply(as_tensor(v))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    return LayerNorm.apply(x, gamma, beta, eps=eps)


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    return Embedding.apply(weight, ids=np.asarray(ids, dtype=np.int64))


def soft_argmax(v, axis: int = -1) -> Tensor:
    """
    Differentiable expected position: sum_i i * softmax(v)_i.

    Raises:
        InvalidInputError: If ``v`` has no positions or contains non-finite values
    """
    v = as_tensor(v)
    if v.ndim == 0 or v.shape[axis] == 0:
        raise InvalidInputError("soft_argmax: empty input")
    n = v.shape[axis]
    shape = [1] * v.ndim
    shape[axis] = n
    positions = np.arange(n, dtype=DTYPE).reshape(shape)
    return (softmax(v, axis=axis) * positions).sum(axis=axis)


def dropout(x: Tensor, rate: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; identity outside training."""
    if not training or rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(DTYPE) / (1.0 - rate)
    return x * keep


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node._ctx is not None:
            for parent in node._ctx.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """
    Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf.

    Repeated calls accumulate; call ``zero_grad`` on parameters to reset.

    Raises:
        ContractError: If ``loss`` is not a scalar
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    adjoints = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        grad = adjoints.pop(id(node), None)
        if grad is None:
            continue
        if node._ctx is None:
            node.grad = grad.copy() if node.grad is None else node.grad + grad
            continue
        for parent, parent_grad in zip(node._ctx.parents, node._ctx.backward(grad)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            adjoints[key] = parent_grad if key not in adjoints else adjoints[key] + parent_grad
