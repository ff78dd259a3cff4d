"""
Finite-difference gradient checking.
"""

from typing import Callable, Optional, Sequence

import numpy as np

from src.nn.tensor import Tensor, no_grad, tensor_sum
from src.utils.error_handling import ContractViolation


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``|a - n| / (|a| + |n|)``, zero when both vanish."""
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def gradient_check(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-5,
    seed: int = 0,
    max_checks: Optional[int] = None,
) -> float:
    """
    Compare reverse-mode gradients of ``fn`` with central differences.

    The output is contracted with fixed random weights into a scalar, so
    every output element contributes. Each input's sampled entries are
    perturbed in place by ``+-h`` and restored.

    Args:
        fn: Differentiable function of ``inputs``; may also close over
            parameters, which can then be listed in ``inputs``
        inputs: Tensors with ``requires_grad`` set
        h: Finite-difference step, within [1e-6, 1e-4]
        seed: Seed for the output weights and sampled entries
        max_checks: Entries sampled per input (all entries when None)

    Returns:
        Worst relative error over the inputs
    """
    if not 1e-6 <= h <= 1e-4:
        raise ContractViolation(f"Step h={h} outside [1e-6, 1e-4]", {"h": h})
    rng = np.random.default_rng(seed)

    for tensor in inputs:
        tensor.grad = None
    output = fn(*inputs)
    weights = rng.standard_normal(output.shape)
    tensor_sum(output * weights).backward()
    analytic = [
        np.zeros_like(t.values) if t.grad is None else t.grad.copy() for t in inputs
    ]
    for tensor in inputs:
        tensor.grad = None

    def objective() -> float:
        with no_grad():
            return float(np.sum(fn(*inputs).values * weights))

    worst = 0.0
    for tensor, grad in zip(inputs, analytic):
        flat = tensor.values.reshape(-1)
        entries = np.arange(flat.size)
        if max_checks is not None and flat.size > max_checks:
            entries = np.sort(rng.choice(flat.size, size=max_checks, replace=False))
        numeric = np.empty(len(entries))
        for slot, entry in enumerate(entries):
            original = flat[entry]
            flat[entry] = original + h
            plus = objective()
            flat[entry] = original - h
            minus = objective()
            flat[entry] = original
            numeric[slot] = (plus - minus) / (2.0 * h)
        worst = max(worst, relative_error(grad.reshape(-1)[entries], numeric))
    return worst
