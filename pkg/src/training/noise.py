"""
Synthetic Gaussian vertex noise.
"""

import logging
from typing import Optional

import numpy as np

from src.mesh.mesh import Mesh, average_edge_length
from src.utils.error_handling import ContractViolation

logger = logging.getLogger(__name__)

NOISE_LEVELS = (0.1, 0.2, 0.3)


def add_gaussian_noise(
    mesh: Mesh, level: float, seed: int = 0, name: Optional[str] = None
) -> Mesh:
    """
    Displace every vertex by an i.i.d. Gaussian 3-vector.

    The per-axis standard deviation is ``level`` times the mean edge length
    of ``mesh``; faces are left untouched.

    Args:
        mesh: Clean mesh
        level: Noise level relative to the mean edge length
        seed: Seed for ``numpy.random.default_rng``
        name: Name of the returned mesh (``<name>_noise<level>`` by default)

    Returns:
        Noisy mesh with the same topology
    """
    if level < 0:
        raise ContractViolation(f"Noise level must be non-negative, got {level}")
    name = name or f"{mesh.name}_noise{level:g}"
    if level == 0:
        return mesh.with_vertices(mesh.vertices, name=name)

    std = level * average_edge_length(mesh)
    rng = np.random.default_rng(seed)
    displacement = rng.normal(0.0, std, size=mesh.vertices.shape)
    logger.debug("Adding noise to %s (std=%.6g, seed=%d)", mesh.name, std, seed)
    return mesh.with_vertices(mesh.vertices + displacement, name=name)
