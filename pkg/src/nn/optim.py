"""
Adam optimizer.
"""

from typing import Iterable, List

import numpy as np

from src.nn.module import Parameter
from src.utils.error_handling import MissingGradient

DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8


def adam_step(
    params: Iterable[Parameter],
    lr: float,
    beta1: float = DEFAULT_BETA1,
    beta2: float = DEFAULT_BETA2,
    eps: float = DEFAULT_EPS,
) -> None:
    """
    Apply one bias-corrected Adam update in place and clear the gradients.

    Raises:
        MissingGradient: If any parameter has no gradient; nothing is updated
    """
    params = list(params)
    missing = [param.name or str(index) for index, param in enumerate(params) if param.grad is None]
    if missing:
        raise MissingGradient(
            f"{len(missing)} parameters have no gradient", {"parameters": missing[:10]}
        )

    for param in params:
        grad = param.grad
        param.step_count += 1
        param.adam_m = beta1 * param.adam_m + (1.0 - beta1) * grad
        param.adam_v = beta2 * param.adam_v + (1.0 - beta2) * grad * grad
        m_hat = param.adam_m / (1.0 - beta1**param.step_count)
        v_hat = param.adam_v / (1.0 - beta2**param.step_count)
        param.values -= lr * m_hat / (np.sqrt(v_hat) + eps)
        param.grad = None


class Adam:
    """Holds a parameter list and the Adam hyperparameters."""

    def __init__(
        self,
        params: Iterable[Parameter],
        lr: float,
        beta1: float = DEFAULT_BETA1,
        beta2: float = DEFAULT_BETA2,
        eps: float = DEFAULT_EPS,
    ):
        self.params: List[Parameter] = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def step(self) -> None:
        adam_step(self.params, self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self) -> None:
        for param in self.params:
            param.grad = None

    def hyperparameters(self) -> dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}
