"""
End-to-end mesh denoising.

The mesh is tiled into patches, every patch is normalized and run through
the network, and predictions are mapped back to world space. Faces and
vertices covered by several patches (or, for vertices, several faces) take
the plain average of all their predictions. The averaged normals then drive
vertex refinement.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.descriptor.lsd import build_patch_lsd, compute_face_descriptors
from src.descriptor.normalization import denormalize, normalize_patch
from src.mesh.mesh import Mesh, average_adjacent_center_distance
from src.mesh.patching import generate_patches
from src.model.surfaceformer import SurfaceFormer
from src.nn.checkpoint import Checkpoint
from src.pipeline.refine import SweepCallback, vertex_refine
from src.utils.config import DEFAULT_REFINE_ITERATIONS
from src.utils.error_handling import IncompatibleCheckpoint
from src.utils.logging import log_stage

logger = logging.getLogger(__name__)

MERGED_NORMAL_TOLERANCE = 1e-8

ModelSource = Union[SurfaceFormer, Checkpoint, str, Path]


@dataclass
class DenoiseResult:
    """
    Attributes:
        mesh: Denoised mesh (input topology, refined vertices)
        per_face_normals: (m, 3) merged unit normals that drove refinement
        iterations_used: Refinement sweeps run (N_v)
        averaged_vertices: (n, 3) merged network positions before refinement
        patch_count: Number of patches the mesh was tiled into
    """

    mesh: Mesh
    per_face_normals: np.ndarray
    iterations_used: int
    averaged_vertices: np.ndarray
    patch_count: int = 0


def _resolve_model(source: ModelSource) -> SurfaceFormer:
    if isinstance(source, SurfaceFormer):
        return source
    return SurfaceFormer.from_checkpoint(source)


def _check_descriptor_parameters(
    model: SurfaceFormer, p_s: Optional[int], T_s: Optional[int]
) -> None:
    expected = (model.config.p_s, model.config.T_s)
    requested = (
        expected[0] if p_s is None else p_s,
        expected[1] if T_s is None else T_s,
    )
    if requested != expected:
        raise IncompatibleCheckpoint(
            "Descriptor parameters differ from those the model was trained with",
            {"model": list(expected), "requested": list(requested)},
        )


def merge_face_normals(
    sums: np.ndarray, counts: np.ndarray, fallback: np.ndarray
) -> np.ndarray:
    """
    Renormalized mean of the predictions per face.

    Faces with no prediction, or whose predictions cancel out, keep
    ``fallback``.
    """
    means = sums / np.maximum(counts, 1)[:, None]
    norms = np.linalg.norm(means, axis=1)
    usable = (counts > 0) & (norms >= MERGED_NORMAL_TOLERANCE)
    merged = np.array(fallback, dtype=np.float64)
    merged[usable] = means[usable] / norms[usable, None]
    conflicted = int(np.count_nonzero((counts > 0) & ~usable))
    if conflicted:
        logger.warning("%d faces had cancelling normal predictions", conflicted)
    return merged


def denoise_mesh(
    mesh: Mesh,
    model: ModelSource,
    T_f: Optional[int] = None,
    N_v: int = DEFAULT_REFINE_ITERATIONS,
    p_s: Optional[int] = None,
    T_s: Optional[int] = None,
    workers: int = 1,
    sweep_callback: Optional[SweepCallback] = None,
) -> DenoiseResult:
    """
    Denoise a mesh with a trained network.

    Args:
        mesh: Noisy input mesh
        model: Network, decoded checkpoint or checkpoint path
        T_f: Patch size for tiling (the model's own by default)
        N_v: Refinement sweeps
        p_s: Sampling precision; must match the model when given
        T_s: Grid half side; must match the model when given
        workers: Processes used for descriptor sampling
        sweep_callback: Forwarded to ``vertex_refine``

    Returns:
        DenoiseResult with the same topology as ``mesh``

    Raises:
        IncompatibleCheckpoint: If the checkpoint is unusable or was trained
            with different descriptor parameters
    """
    network = _resolve_model(model)
    _check_descriptor_parameters(network, p_s, T_s)
    config = network.config
    patch_faces = config.T_f if T_f is None else T_f

    patches = generate_patches(mesh, patch_faces)
    d_a = average_adjacent_center_distance(mesh)
    with log_stage(logger, "descriptors"):
        table = compute_face_descriptors(
            mesh, config.p_s, config.T_s, d_a=d_a, workers=workers
        )

    normal_sums = np.zeros((mesh.n_faces, 3))
    normal_counts = np.zeros(mesh.n_faces, dtype=np.int64)
    vertex_sums = np.zeros((mesh.n_vertices, 3))
    vertex_counts = np.zeros(mesh.n_vertices, dtype=np.int64)

    for patch in patches:
        if patch.size < 2:
            logger.warning(
                "Patch around face %d has a single face; keeping its noisy normal",
                patch.center_face,
            )
            continue
        lsd = build_patch_lsd(mesh, patch, d_a, config.p_s, config.T_s, table)
        normalized, ctx = normalize_patch(lsd, patch, mesh, center_fallback=True)
        normals, offsets = network.predict(normalized.grids, normalized.spatial)
        world_normals, world_corners = denormalize(
            normals, normalized.spatial[:, 6:15] + offsets, ctx
        )
        faces = np.asarray(patch.faces, dtype=np.int64)
        np.add.at(normal_sums, faces, world_normals)
        np.add.at(normal_counts, faces, 1)
        corner_ids = mesh.faces[faces].ravel()
        np.add.at(vertex_sums, corner_ids, world_corners.reshape(-1, 3))
        np.add.at(vertex_counts, corner_ids, 1)
        logger.debug("Patch around face %d: %d faces", patch.center_face, patch.size)

    merged = merge_face_normals(normal_sums, normal_counts, mesh.face_normals)
    averaged = np.array(mesh.vertices, dtype=np.float64)
    covered = vertex_counts > 0
    averaged[covered] = vertex_sums[covered] / vertex_counts[covered, None]

    with log_stage(logger, "vertex refinement"):
        refined = vertex_refine(averaged, mesh.faces, merged, N_v, sweep_callback)
    logger.info(
        "Denoised %s: %d patches, %d refinement sweeps", mesh.name, len(patches), N_v
    )
    return DenoiseResult(
        mesh=mesh.with_vertices(refined, name=f"{mesh.name}_denoised"),
        per_face_normals=merged,
        iterations_used=N_v,
        averaged_vertices=averaged,
        patch_count=len(patches),
    )
