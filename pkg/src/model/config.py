"""
Model hyperparameters.
"""

from typing import Any, Dict, Literal, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.utils.config import (
    DEFAULT_GRID_HALF_SIDE,
    DEFAULT_KNN_K,
    DEFAULT_PATCH_FACES,
    DEFAULT_SAMPLING_PRECISION,
)
from src.utils.error_handling import ContractViolation, HeadDivisibility

PresetName = Literal["small", "middle", "large"]

# (D, L, N_h)
PRESETS: Dict[str, Tuple[int, int, int]] = {
    "small": (256, 8, 8),
    "middle": (512, 12, 12),
    "large": (1024, 16, 16),
}


class ModelConfig(BaseModel):
    """
    Network width and depth plus the descriptor parameters it was built for.

    ``D`` is the latent width, ``L`` the number of encoder blocks and ``N_h``
    the attention head count.
    """

    model_config = ConfigDict(frozen=True)

    size_preset: PresetName = "middle"
    D: int = Field(default=512, gt=0)
    L: int = Field(default=12, ge=0)
    N_h: int = Field(default=12, gt=0)
    T_s: int = Field(default=DEFAULT_GRID_HALF_SIDE, ge=1)
    p_s: int = Field(default=DEFAULT_SAMPLING_PRECISION, ge=1)
    T_f: int = Field(default=DEFAULT_PATCH_FACES, ge=1)
    knn_k: int = Field(default=DEFAULT_KNN_K, ge=1)
    conv_channels: int = Field(default=32, gt=0)
    res_blocks: int = Field(default=6, ge=0)

    @model_validator(mode="after")
    def _check_heads(self) -> "ModelConfig":
        if self.D % self.N_h:
            raise ValueError(f"D={self.D} is not divisible by N_h={self.N_h}")
        return self

    @property
    def mlp_width(self) -> int:
        return 4 * self.D

    @property
    def grid_side(self) -> int:
        return 2 * self.T_s

    @classmethod
    def from_preset(cls, name: str, **overrides: Any) -> "ModelConfig":
        """
        Build a configuration from a size preset, with optional field overrides.

        Raises:
            HeadDivisibility: If the resulting D is not divisible by N_h
            ContractViolation: On an unknown preset or any other invalid value
        """
        if name not in PRESETS:
            raise ContractViolation(
                f"Unknown model preset: {name}", {"presets": sorted(PRESETS)}
            )
        dim, layers, heads = PRESETS[name]
        values: Dict[str, Any] = {"size_preset": name, "D": dim, "L": layers, "N_h": heads}
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls.build(**values)

    @classmethod
    def build(cls, **values: Any) -> "ModelConfig":
        """Validate ``values``, mapping validation failures onto library errors."""
        dim, heads = values.get("D"), values.get("N_h")
        if isinstance(dim, int) and isinstance(heads, int) and heads > 0 and dim % heads:
            raise HeadDivisibility(
                f"Width {dim} is not divisible by {heads} heads",
                {"width": dim, "heads": heads},
            )
        try:
            return cls(**values)
        except ValidationError as e:
            raise ContractViolation(
                "Invalid model configuration", {"errors": e.errors(include_url=False)}
            )

    def descriptor_parameters(self) -> Tuple[int, int, int]:
        """(p_s, T_s, T_f)"""
        return self.p_s, self.T_s, self.T_f
