"""
Training objective.
"""

import numpy as np

from src.model.surfaceformer import PatchPrediction
from src.nn.tensor import Tensor, absolute, mul, tensor_sum
from src.training.samples import TrainingSample
from src.utils.config import DEFAULT_LOSS_ALPHA
from src.utils.error_handling import ShapeMismatch


def loss(
    pred: PatchPrediction, sample: TrainingSample, alpha: float = DEFAULT_LOSS_ALPHA
) -> Tensor:
    """
    Summed L1 error of the normals plus ``alpha`` times that of the offsets.

    Masked faces contribute nothing.

    Raises:
        ShapeMismatch: If the prediction does not cover the sample's faces
    """
    n = sample.size
    if pred.normals.shape != (n, 3) or pred.vertex_offsets.shape != (n, 9):
        raise ShapeMismatch(
            "Prediction does not match the sample",
            {
                "normals": list(pred.normals.shape),
                "offsets": list(pred.vertex_offsets.shape),
                "faces": n,
            },
        )
    keep = np.asarray(sample.mask, dtype=np.float64)[:, None]
    normal_term = tensor_sum(mul(absolute(pred.normals - sample.gt_normals), keep))
    offset_term = tensor_sum(mul(absolute(pred.vertex_offsets - sample.gt_offsets), keep))
    return normal_term + offset_term * alpha
