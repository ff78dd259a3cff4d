"""
Parameters, the module base class and weight initializers.
"""

from typing import Dict, Iterator, List, Tuple

import numpy as np

from src.nn.tensor import Tensor
from src.utils.error_handling import IncompatibleCheckpoint

TRUNCATION = 2.0


class Parameter(Tensor):
    """Trainable leaf tensor carrying its own Adam moment estimates."""

    def __init__(self, values: np.ndarray, name: str = ""):
        super().__init__(values, requires_grad=True, name=name or None)
        self.adam_m = np.zeros_like(self.values)
        self.adam_v = np.zeros_like(self.values)
        self.step_count = 0


class Module:
    """
    Base class for layers. Parameters and sub-modules are discovered from
    instance attributes (including lists of modules) in assignment order.
    """

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            name = f"{prefix}{attr}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{name}.")
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{index}.")
                    elif isinstance(item, Parameter):
                        yield f"{name}.{index}", item

    def parameters(self) -> List[Parameter]:
        return [param for _, param in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(param.size for param in self.parameters())

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: param.values.copy() for name, param in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """
        Copy values into the parameters.

        Raises:
            IncompatibleCheckpoint: On missing, unexpected or mis-shaped entries
        """
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise IncompatibleCheckpoint(
                "Parameter names do not match the model",
                {"missing": missing[:10], "unexpected": unexpected[:10]},
            )
        for name, param in own.items():
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != param.shape:
                raise IncompatibleCheckpoint(
                    f"Parameter {name} has shape {values.shape}, expected {param.shape}",
                    {"name": name},
                )
            param.values[...] = values


def truncated_normal(
    rng: np.random.Generator, shape: Tuple[int, ...], std: float
) -> np.ndarray:
    """Normal(0, std) samples, redrawing any beyond two standard deviations."""
    values = rng.standard_normal(shape)
    outside = np.abs(values) > TRUNCATION
    while outside.any():
        values[outside] = rng.standard_normal(int(outside.sum()))
        outside = np.abs(values) > TRUNCATION
    return values * std


def kaiming_normal(
    rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int
) -> np.ndarray:
    """He initialization for ReLU layers."""
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
