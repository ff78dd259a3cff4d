"""
Tests for the autograd tensor and its differentiable ops
"""

import numpy as np
import pytest

from src.nn.gradcheck import gradient_check, relative_error
from src.nn.tensor import (
    Tensor,
    absolute,
    concat,
    conv2d_3x3,
    gelu,
    is_grad_enabled,
    layer_norm,
    matmul,
    no_grad,
    normalize_rows,
    relu,
    softmax,
    take_rows,
    tensor_max,
    transpose,
)
from src.utils.error_handling import ContractViolation, ShapeMismatch

TOLERANCE = 1e-6


def _leaf(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


class TestBackward:
    def test_scalar_chain(self):
        """Test d/dx of (3x + 1) * x"""
        x = Tensor([2.0], requires_grad=True)
        y = (x * 3.0 + 1.0) * x
        y.backward()
        assert x.grad.tolist() == [13.0]

    def test_gradients_accumulate(self):
        """Test two backward passes add up"""
        x = Tensor([1.0, 2.0], requires_grad=True)
        (x * 2.0).sum().backward()
        (x * 2.0).sum().backward()
        assert x.grad.tolist() == [4.0, 4.0]
        x.zero_grad()
        assert x.grad is None

    def test_shared_subexpression(self):
        """Test a node used twice receives both contributions"""
        x = Tensor([3.0], requires_grad=True)
        y = x * x
        (y + y).backward()
        assert x.grad.tolist() == [12.0]

    def test_non_scalar_needs_seed(self):
        """Test backward on a vector without a seed gradient"""
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ShapeMismatch):
            (x * 2.0).backward()
        with pytest.raises(ShapeMismatch):
            (x * 2.0).backward(np.ones(3))

    def test_no_grad_builds_no_graph(self):
        """Test inference mode"""
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            assert not is_grad_enabled()
            y = x * 2.0
        assert is_grad_enabled()
        assert not y.requires_grad
        assert y.is_leaf

    def test_constants_get_no_gradient(self):
        """Test operands without requires_grad stay untouched"""
        x = Tensor([1.0], requires_grad=True)
        c = Tensor([5.0])
        (x * c).sum().backward()
        assert c.grad is None

    def test_matmul_shape_check(self):
        """Test misaligned matrix product"""
        with pytest.raises(ShapeMismatch):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


class TestGradientCheck:
    """Finite differences against every differentiable op."""

    @pytest.mark.parametrize(
        "op",
        [
            lambda a, b: a + b,
            lambda a, b: a - b,
            lambda a, b: a * b,
            lambda a, b: a @ transpose(b, (1, 0)),
            lambda a, b: concat([a, b], axis=0),
            lambda a, b: concat([a, b], axis=1),
        ],
        ids=["add", "sub", "mul", "matmul", "concat0", "concat1"],
    )
    def test_binary_ops(self, op):
        """Test binary ops on (4, 3) operands"""
        rng = np.random.default_rng(0)
        a, b = _leaf(rng, 4, 3), _leaf(rng, 4, 3)
        assert gradient_check(op, [a, b]) < TOLERANCE

    def test_broadcast_add(self):
        """Test gradients reduce over broadcast axes"""
        rng = np.random.default_rng(1)
        a, b = _leaf(rng, 5, 3), _leaf(rng, 3)
        assert gradient_check(lambda x, y: x * y + y, [a, b]) < TOLERANCE

    @pytest.mark.parametrize(
        "op",
        [relu, gelu, absolute, lambda x: x.sum(axis=1), lambda x: x.mean(axis=0)],
        ids=["relu", "gelu", "abs", "sum", "mean"],
    )
    def test_unary_ops(self, op):
        """Test elementwise ops and reductions"""
        rng = np.random.default_rng(2)
        assert gradient_check(op, [_leaf(rng, 6, 4)]) < TOLERANCE

    def test_max(self):
        """Test the max reduction"""
        rng = np.random.default_rng(3)
        assert gradient_check(lambda x: tensor_max(x, axis=1), [_leaf(rng, 5, 4)]) < TOLERANCE

    def test_softmax_with_mask(self):
        """Test masked softmax"""
        rng = np.random.default_rng(4)
        mask = np.array([True, False, True, True])
        op = lambda x: softmax(x, axis=-1, mask=mask) * Tensor(np.arange(4.0))
        assert gradient_check(op, [_leaf(rng, 3, 4)]) < TOLERANCE

    @pytest.mark.parametrize("seed", range(10))
    def test_layer_norm(self, seed):
        """Test layer normalization with gain and bias"""
        rng = np.random.default_rng(seed)
        x, gain, bias = _leaf(rng, 4, 6), _leaf(rng, 6), _leaf(rng, 6)
        assert gradient_check(layer_norm, [x, gain, bias]) < TOLERANCE

    def test_normalize_rows(self):
        """Test unit-length normalization"""
        rng = np.random.default_rng(6)
        assert gradient_check(normalize_rows, [_leaf(rng, 5, 3)]) < TOLERANCE

    @pytest.mark.parametrize("seed", range(10))
    def test_conv2d(self, seed):
        """Test the 3x3 convolution"""
        rng = np.random.default_rng(seed)
        x, w, b = _leaf(rng, 2, 2, 4, 4), _leaf(rng, 18, 3), _leaf(rng, 3)
        assert gradient_check(conv2d_3x3, [x, w, b]) < TOLERANCE

    def test_repeated_row_gather(self):
        """Test gathering rows with repeats accumulates"""
        rng = np.random.default_rng(8)
        rows = np.array([[0, 2], [2, 2], [1, 0]])
        assert gradient_check(lambda x: take_rows(x, rows), [_leaf(rng, 3, 4)]) < TOLERANCE

    def test_reshape_transpose(self):
        """Test shape-only ops"""
        rng = np.random.default_rng(9)
        op = lambda x: transpose(x.reshape(3, 2, 4), (2, 0, 1))
        assert gradient_check(op, [_leaf(rng, 6, 4)]) < TOLERANCE

    def test_wrong_gradient_is_detected(self):
        """Test the checker flags a deliberately broken backward"""
        rng = np.random.default_rng(10)
        x = _leaf(rng, 4)

        def broken(a):
            return Tensor(a.values**2, requires_grad=True, parents=(a,), backward_fn=lambda g: (g,))

        assert gradient_check(broken, [x]) > 1e-2

    def test_step_range(self):
        """Test the finite-difference step must be in [1e-6, 1e-4]"""
        with pytest.raises(ContractViolation):
            gradient_check(relu, [Tensor([1.0], requires_grad=True)], h=1e-2)


def test_relative_error():
    """Test the error measure"""
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_error(np.ones(2), np.ones(2)) == 0.0
    assert relative_error(np.ones(2), -np.ones(2)) == pytest.approx(1.0)
