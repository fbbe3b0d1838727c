"""
Finite-difference verification of analytic gradients.

Central differences per coordinate, compared with what ``backward``
accumulates. Used by the test-suite on every training objective.
"""

import logging
from typing import Callable, Dict, Mapping, Sequence, Union

import numpy as np

from amtl.errors import ContractError, NondeterminismError
from amtl.models import GradReport
from amtl.tensor import Tensor, backward, no_grad

logger = logging.getLogger(__name__)

REL_ERR_FLOOR = 1e-8

Params = Union[Mapping[str, Tensor], Sequence[Tensor]]


def _named(params: Params) -> Dict[str, Tensor]:
    if isinstance(params, Mapping):
        return dict(params)
    return {(p.name or f"param{i}"): p for i, p in enumerate(params)}


def _evaluate(f: Callable[[], Tensor]) -> float:
    with no_grad():
        return f().item()


def grad_check(f: Callable[[], Tensor], params: Params, eps: float = 1e-5) -> GradReport:
    """
    Compare the analytic gradient of ``f`` against central differences.

    Args:
        f: Zero-argument function returning a scalar Tensor; it must read the
           current values of ``params``
        params: Tensors to perturb, by name or in order
        eps: Finite-difference step, in (0, 1e-2]

    Returns:
        GradReport with the largest relative error
        ``|a - n| / max(|a|, |n|, 1e-8)`` and where it occurred

    Raises:
        ContractError: If eps is out of range
        NondeterminismError: If two evaluations at the same point differ
    """
    if not 0.0 < eps <= 1e-2:
        raise ContractError(f"eps must lie in (0, 1e-2], got {eps}")
    named = _named(params)

    first, second = _evaluate(f), _evaluate(f)
    if first != second:
        raise NondeterminismError(f"f returned {first!r} then {second!r} at the same point")

    for p in named.values():
        p.zero_grad()
    backward(f())
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in named.items()
    }

    worst, worst_path, checked = 0.0, "", 0
    for name, p in named.items():
        for j, idx in enumerate(np.ndindex(p.data.shape)):
            original = p.data[idx]
            p.data[idx] = original + eps
            f_plus = _evaluate(f)
            p.data[idx] = original - eps
            f_minus = _evaluate(f)
            p.data[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = analytic[name][idx]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), REL_ERR_FLOOR)
            checked += 1
            if rel > worst or not worst_path:
                worst, worst_path = rel, f"{name}[{j}]"
        p.zero_grad()

    logger.debug("gradient check", extra={"max_rel_err": worst, "coordinates": checked})
    return GradReport(max_rel_err=worst, worst_param_path=worst_path, n_checked=checked)
