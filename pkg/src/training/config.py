"""
Optimization settings.
"""

from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.nn.optim import DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS
from src.utils.config import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_CHECKPOINT_EVERY,
    DEFAULT_ITERATIONS,
    DEFAULT_JITTER_STD,
    DEFAULT_LEARNING_RATE,
    DEFAULT_LOSS_ALPHA,
    DEFAULT_SEED,
)
from src.utils.error_handling import ContractViolation


class TrainConfig(BaseModel):
    """
    Adam hyperparameters, batching, loss weight and bookkeeping.

    ``checkpoint_every`` of 0 writes only the final checkpoint.
    """

    model_config = ConfigDict(frozen=True)

    lr: float = Field(default=DEFAULT_LEARNING_RATE, ge=0)
    beta1: float = Field(default=DEFAULT_BETA1, ge=0, lt=1)
    beta2: float = Field(default=DEFAULT_BETA2, ge=0, lt=1)
    eps: float = Field(default=DEFAULT_EPS, gt=0)
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, ge=1)
    iterations: int = Field(default=DEFAULT_ITERATIONS, ge=0)
    alpha: float = Field(default=DEFAULT_LOSS_ALPHA, gt=0)
    seed: int = Field(default=DEFAULT_SEED, ge=0)
    checkpoint_every: int = Field(default=DEFAULT_CHECKPOINT_EVERY, ge=0)
    jitter_std: float = Field(default=DEFAULT_JITTER_STD, ge=0)
    augment: bool = True
    log_every: int = Field(default=100, ge=1)

    @classmethod
    def build(cls, **values: Any) -> "TrainConfig":
        """Validate ``values``; ``None`` entries fall back to the defaults."""
        try:
            return cls(**{key: value for key, value in values.items() if value is not None})
        except ValidationError as e:
            raise ContractViolation(
                "Invalid training configuration", {"errors": e.errors(include_url=False)}
            )
