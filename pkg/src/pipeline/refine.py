"""
Vertex refinement against a fixed face-normal field.
"""

import logging
from typing import Callable, Optional

import numpy as np

from src.utils.config import DEFAULT_REFINE_ITERATIONS
from src.utils.error_handling import ShapeMismatch

logger = logging.getLogger(__name__)

SweepCallback = Callable[[int, np.ndarray], None]


def vertex_refine(
    vertices: np.ndarray,
    faces: np.ndarray,
    normals: np.ndarray,
    iterations: int = DEFAULT_REFINE_ITERATIONS,
    callback: Optional[SweepCallback] = None,
) -> np.ndarray:
    """
    Move vertices so their faces agree with ``normals``.

    Each sweep sets ``v += mean over faces f of v: n_f (n_f . (c_f - v))``
    with face centers ``c_f`` taken from the pre-sweep positions, so every
    vertex updates from the same state. Vertices on no face stay put.

    Args:
        vertices: (n, 3) start positions
        faces: (m, 3) vertex indices
        normals: (m, 3) unit target normals, held fixed
        iterations: Number of sweeps (N_v)
        callback: Called with (sweep number, positions) after each sweep

    Returns:
        (n, 3) refined positions
    """
    positions = np.array(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    normals = np.asarray(normals, dtype=np.float64)
    if normals.shape != (len(faces), 3):
        raise ShapeMismatch(
            "Need one normal per face",
            {"normals": list(normals.shape), "faces": len(faces)},
        )

    corners = faces.ravel()
    counts = np.bincount(corners, minlength=len(positions)).astype(np.float64)
    counts[counts == 0] = 1.0

    for sweep in range(1, iterations + 1):
        face_points = positions[faces]
        centers = face_points.mean(axis=1)
        heights = np.einsum("fkd,fd->fk", centers[:, None, :] - face_points, normals)
        moves = heights[:, :, None] * normals[:, None, :]
        total = np.zeros_like(positions)
        np.add.at(total, corners, moves.reshape(-1, 3))
        positions = positions + total / counts[:, None]
        if callback is not None:
            callback(sweep, positions)

    logger.debug("Refined %d vertices over %d sweeps", len(positions), iterations)
    return positions
