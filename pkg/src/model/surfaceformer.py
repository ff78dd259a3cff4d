"""
The dual-stream denoising transformer.

Per patch, a geometric stream embeds every face's normal grid (a linear
embedding of the flattened grid next to a small residual CNN) and a spatial
stream runs four edge convolutions over the 15-value spatial rows. The two
are added, passed through the encoder blocks, and read out by a normal head
and a vertex-offset head.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from src.model.config import ModelConfig
from src.nn.checkpoint import Checkpoint, load_checkpoint
from src.nn.layers import Conv2d, EdgeConv, EncoderBlock, LayerNorm, Linear, ResidualConvBlock
from src.nn.module import Module
from src.nn.tensor import Tensor, concat, mul, no_grad, normalize_rows, relu, transpose
from src.utils.error_handling import IncompatibleCheckpoint, ShapeMismatch, TooFewPoints

logger = logging.getLogger(__name__)

EDGE_CONV_WIDTHS = (64, 64, 128, 256)
SPATIAL_WIDTH = 15


@dataclass
class PatchPrediction:
    """Network output in the normalized frame of a patch."""

    normals: Tensor
    vertex_offsets: Tensor


class GeometricEncoder(Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        side = config.grid_side
        self.side = side
        self.linear_embedding = Linear(side * side * 3, config.D, rng)
        self.stem = Conv2d(3, config.conv_channels, rng)
        self.blocks = [
            ResidualConvBlock(config.conv_channels, rng) for _ in range(config.res_blocks)
        ]
        self.merge = Linear(config.D + config.conv_channels, config.D, rng)

    def forward(self, grids: Tensor) -> Tensor:
        """(n, side, side, 3) normal grids -> (n, D)."""
        if grids.ndim != 4 or grids.shape[1:] != (self.side, self.side, 3):
            raise ShapeMismatch(
                "Normal grids must be (n, side, side, 3)",
                {"input": list(grids.shape), "side": self.side},
            )
        n = grids.shape[0]
        linear = self.linear_embedding(grids.reshape(n, self.side * self.side * 3))
        shape = relu(self.stem(transpose(grids, (0, 3, 1, 2))))
        for block in self.blocks:
            shape = block(shape)
        pooled = shape.mean(axis=(2, 3))
        return self.merge(concat([linear, pooled], axis=-1))


class SpatialEncoder(Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.k = config.knn_k
        stages = []
        width = SPATIAL_WIDTH
        for out in EDGE_CONV_WIDTHS:
            stages.append(EdgeConv(width, out, rng))
            width = out
        self.stages = stages
        self.project = Linear(sum(EDGE_CONV_WIDTHS), config.D, rng)

    def forward(self, spatial: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        """(n, 15) spatial rows -> (n, D); k is clamped to the available points."""
        if spatial.ndim != 2 or spatial.shape[1] != SPATIAL_WIDTH:
            raise ShapeMismatch(
                "Spatial rows must be (n, 15)", {"input": list(spatial.shape)}
            )
        available = spatial.shape[0] if mask is None else int(np.count_nonzero(mask))
        if available < 2:
            raise TooFewPoints(
                "The spatial encoder needs at least 2 faces", {"points": available}
            )
        k = min(self.k, available - 1)
        features: List[Tensor] = []
        hidden = spatial
        for stage in self.stages:
            hidden = stage(hidden, k, mask)
            features.append(hidden)
        return self.project(concat(features, axis=-1))


class SurfaceFormer(Module):
    """
    Full network. Weights are drawn from ``numpy.random.default_rng(seed)``,
    so a config and a seed fix the initial model exactly.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.config = config
        self.geometric = GeometricEncoder(config, rng)
        self.spatial = SpatialEncoder(config, rng)
        self.encoders = [
            EncoderBlock(config.D, config.N_h, config.mlp_width, rng)
            for _ in range(config.L)
        ]
        self.normal_norm = LayerNorm(config.D)
        self.normal_head = Linear(config.D, 3, rng)
        self.vertex_norm = LayerNorm(config.D)
        self.vertex_head = Linear(config.D, 9, rng)

    def forward(
        self,
        grids: Union[Tensor, np.ndarray],
        spatial: Union[Tensor, np.ndarray],
        mask: Optional[np.ndarray] = None,
    ) -> PatchPrediction:
        """
        Predict normalized normals and vertex offsets for one patch.

        Args:
            grids: (n, side, side, 3) normalized normal grids
            spatial: (n, 15) normalized spatial rows
            mask: Optional (n,) boolean token mask; masked rows are left out
                of attention keys and zeroed in both outputs

        Returns:
            PatchPrediction with (n, 3) unit normals and (n, 9) offsets
        """
        grids = grids if isinstance(grids, Tensor) else Tensor(grids)
        spatial = spatial if isinstance(spatial, Tensor) else Tensor(spatial)
        if grids.shape[0] != spatial.shape[0]:
            raise ShapeMismatch(
                "Grid and spatial row counts differ",
                {"grids": grids.shape[0], "spatial": spatial.shape[0]},
            )
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != (grids.shape[0],):
                raise ShapeMismatch(
                    "Token mask must have one entry per face",
                    {"mask": list(mask.shape), "faces": grids.shape[0]},
                )

        tokens = self.geometric(grids) + self.spatial(spatial, mask)
        for block in self.encoders:
            tokens = block(tokens, mask)

        normals = normalize_rows(self.normal_head(self.normal_norm(tokens)))
        offsets = self.vertex_head(self.vertex_norm(tokens))
        if mask is not None:
            keep = mask.astype(np.float64)[:, None]
            normals = mul(normals, keep)
            offsets = mul(offsets, keep)
        return PatchPrediction(normals=normals, vertex_offsets=offsets)

    def predict(
        self, grids: np.ndarray, spatial: np.ndarray, mask: Optional[np.ndarray] = None
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Inference without building a graph; returns numpy arrays."""
        with no_grad():
            prediction = self.forward(grids, spatial, mask)
        return prediction.normals.values, prediction.vertex_offsets.values

    def checkpoint_config(self) -> dict:
        return {"model": self.config.model_dump()}

    @classmethod
    def from_checkpoint(
        cls, source: Union[str, Path, Checkpoint], with_optimizer_state: bool = False
    ) -> "SurfaceFormer":
        """
        Rebuild a model from a checkpoint file or a decoded checkpoint.

        Raises:
            IncompatibleCheckpoint: If the stored configuration or parameters
                do not describe this network
        """
        checkpoint = source if isinstance(source, Checkpoint) else load_checkpoint(source)
        stored = checkpoint.config.get("model")
        if not isinstance(stored, dict):
            raise IncompatibleCheckpoint("Checkpoint carries no model configuration")
        try:
            config = ModelConfig.build(**stored)
        except Exception as e:
            raise IncompatibleCheckpoint(
                "Checkpoint model configuration is invalid", {"error": str(e)}
            )
        model = cls(config)
        checkpoint.apply_to(model, with_optimizer_state=with_optimizer_state)
        logger.info(
            "Loaded %s model (D=%d, L=%d, N_h=%d) from step %d",
            config.size_preset,
            config.D,
            config.L,
            config.N_h,
            checkpoint.step,
        )
        return model
