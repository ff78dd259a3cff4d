"""
Evaluation metrics: mean normal angle error (degrees) and the normalized
one-sided mean nearest-vertex distance.
"""

from typing import Optional

import numpy as np

from src.mesh.mesh import Mesh, average_edge_length
from src.pipeline.spatial_grid import UniformGrid, point_distances
from src.utils.error_handling import ContractViolation, EmptyMesh, TopologyMismatch

COLLAPSED_FACE_ERROR = 90.0


def normal_angle_error(normals: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """
    Per-row angle in degrees between two normal fields.

    Uses ``atan2(|a x b|, a . b)``: equal rows give exactly 0, opposite rows
    exactly 180, and dot products rounded past +-1 cannot produce NaN. A zero
    row (the normal of a collapsed face) has no direction: against a real
    normal it scores 90, against another zero row 0.
    """
    normals = np.asarray(normals, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    dots = np.einsum("ij,ij->i", normals, reference)
    sines = np.linalg.norm(np.cross(normals, reference), axis=1)
    angles = np.degrees(np.arctan2(sines, dots))
    collapsed = normals.any(axis=1) != reference.any(axis=1)
    angles[collapsed] = COLLAPSED_FACE_ERROR
    return angles


def metric_ea(denoised: Mesh, gt: Mesh) -> float:
    """
    Mean angle between corresponding face normals, in degrees.

    Raises:
        TopologyMismatch: If the face counts differ
        EmptyMesh: If there are no faces
    """
    if denoised.n_faces != gt.n_faces:
        raise TopologyMismatch(
            "Meshes have different face counts",
            {"denoised": denoised.n_faces, "gt": gt.n_faces},
        )
    if gt.n_faces == 0:
        raise EmptyMesh("Cannot compare meshes without faces")
    return float(normal_angle_error(denoised.face_normals, gt.face_normals).mean())


def metric_ev(
    denoised: Mesh,
    gt: Mesh,
    edge_length: Optional[float] = None,
    brute_force: bool = False,
) -> float:
    """
    Mean distance from each denoised vertex to its nearest ground-truth
    vertex, divided by the ground truth's mean edge length.

    Args:
        denoised: Mesh being scored
        gt: Reference mesh
        edge_length: Normalizer to use instead of ``average_edge_length(gt)``
        brute_force: Scan every reference vertex instead of the grid

    Raises:
        EmptyMesh: If either mesh has no vertices
    """
    if gt.n_vertices == 0 or denoised.n_vertices == 0:
        raise EmptyMesh("Both meshes need vertices")
    scale = average_edge_length(gt) if edge_length is None else float(edge_length)
    if not scale > 0:
        raise ContractViolation(f"Edge length must be positive, got {scale}")

    targets = gt.vertices
    if brute_force:
        nearest = [float(point_distances(targets, v).min()) for v in denoised.vertices]
    else:
        grid = UniformGrid(targets, scale)
        nearest = [grid.nearest(v)[0] for v in denoised.vertices]
    return float(np.mean(nearest)) / scale
