"""
Unit Tests for the numeric core

Forward values against numpy, backward against hand-derived gradients, and
the no_grad and finite-input contracts.
"""

import numpy as np
import pytest

from amtl.errors import ContractError, InvalidInputError
from amtl.tensor import (
    Parameter,
    Tensor,
    dropout,
    log_sigmoid,
    log_softmax,
    logsumexp,
    no_grad,
    sigmoid,
    soft_argmax,
    softmax,
)


class TestForward:
    """Test forward computations."""

    def test_arithmetic_matches_numpy(self):
        """Test broadcasting arithmetic and matmul."""
        a = np.arange(6.0).reshape(2, 3)
        b = np.array([1.0, 2.0, 3.0])
        out = (Tensor(a) * b + 1.0) @ Tensor(np.ones((3, 2)))
        np.testing.assert_allclose(out.data, (a * b + 1.0) @ np.ones((3, 2)))

    def test_ndarray_on_left_defers_to_tensor(self):
        """Test ndarray * Tensor yields a Tensor, not an object array."""
        out = np.array([2.0, 3.0]) * Tensor([1.0, 1.0])
        assert isinstance(out, Tensor)
        np.testing.assert_allclose(out.data, [2.0, 3.0])

    def test_softmax_stable_for_large_inputs(self):
        """Test softmax of huge logits stays finite and normalised."""
        p = softmax([1000.0, 1000.0, -1000.0])
        np.testing.assert_allclose(p.data, [0.5, 0.5, 0.0])

    def test_softmax_rejects_non_finite(self):
        """Test non-finite inputs raise InvalidInputError."""
        with pytest.raises(InvalidInputError):
            softmax([0.0, float("inf")])

    def test_log_sigmoid_saturated(self):
        """Test log-sigmoid of large negative input is finite and linear."""
        assert log_sigmoid(-800.0).item() == pytest.approx(-800.0)
        assert sigmoid(800.0).item() == pytest.approx(1.0)

    def test_log_softmax_and_logsumexp(self):
        """Test log_softmax rows exponentiate to 1."""
        x = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
        np.testing.assert_allclose(np.exp(log_softmax(x).data).sum(axis=-1), [1.0, 1.0])
        assert logsumexp(np.zeros(4)).item() == pytest.approx(np.log(4.0))

    @pytest.mark.parametrize(
        "logits,expected",
        [([0.0, 0.0, 0.0], 1.0), ([50.0, 0.0, 0.0], 0.0), ([0.0, 0.0, 50.0], 2.0)],
    )
    def test_soft_argmax(self, logits, expected):
        """Test soft-argmax is the expected position."""
        assert soft_argmax(logits).item() == pytest.approx(expected, abs=1e-9)

    def test_soft_argmax_empty(self):
        """Test an empty input is rejected."""
        with pytest.raises(InvalidInputError):
            soft_argmax(np.zeros(0))


class TestBackward:
    """Test reverse-mode gradients."""

    def test_product_rule(self):
        """Test d(x*y)/dx = y."""
        x, y = Parameter([2.0, 3.0]), Parameter([5.0, 7.0])
        (x * y).sum().backward()
        np.testing.assert_allclose(x.grad, [5.0, 7.0])
        np.testing.assert_allclose(y.grad, [2.0, 3.0])

    def test_broadcast_gradient_reduced(self):
        """Test gradients of a broadcast operand are summed back to its shape."""
        w = Parameter(np.ones(3))
        (Tensor(np.ones((4, 3))) * w).sum().backward()
        np.testing.assert_allclose(w.grad, [4.0, 4.0, 4.0])

    def test_shared_node_accumulates(self):
        """Test a tensor used twice receives both contributions."""
        x = Parameter(3.0)
        (x * x + x).backward()
        assert x.grad.item() == pytest.approx(7.0)

    def test_getitem_scatter(self):
        """Test fancy indexing scatters gradients, repeated indices added."""
        x = Parameter(np.zeros(4))
        x[np.array([0, 2, 2])].sum().backward()
        np.testing.assert_allclose(x.grad, [1.0, 0.0, 2.0, 0.0])

    def test_backward_requires_scalar(self):
        """Test backward on a vector is a contract error."""
        with pytest.raises(ContractError):
            (Parameter([1.0, 2.0]) * 2.0).backward()

    def test_no_grad_records_nothing(self):
        """Test operations under no_grad build no graph."""
        x = Parameter([1.0, 2.0])
        with no_grad():
            y = (x * 2.0).sum()
        assert not y.requires_grad
        y.backward()
        assert x.grad is None


class TestDropout:
    """Test inverted dropout."""

    def test_identity_in_eval(self):
        """Test dropout is the identity outside training."""
        x = Tensor(np.ones(10))
        assert dropout(x, 0.5, np.random.default_rng(0), training=False) is x

    def test_inverted_scaling(self):
        """Test kept units are scaled by 1 / (1 - rate)."""
        out = dropout(Tensor(np.ones(1000)), 0.5, np.random.default_rng(0), training=True)
        assert set(np.unique(out.data)) <= {0.0, 2.0}
        assert 0.4 < (out.data > 0).mean() < 0.6
