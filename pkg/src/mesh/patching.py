"""
Patch generation: overlapping fixed-size face sets grown ring by ring.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.mesh.mesh import Mesh
from src.utils.error_handling import ContractViolation, EmptyMesh, MeshIndexError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Patch:
    """A center face and its ordered member faces (center first, then by ring)."""

    center_face: int
    faces: Tuple[int, ...]
    mesh_ref: str

    @property
    def size(self) -> int:
        return len(self.faces)


def _check_patch_size(patch_faces: int) -> None:
    if patch_faces < 1:
        raise ContractViolation(
            f"Patch size must be at least 1, got {patch_faces}",
            {"patch_faces": patch_faces},
        )


def grow_patch(mesh: Mesh, center: int, patch_faces: int) -> Tuple[int, ...]:
    """
    Grow a patch around ``center`` by whole edge-adjacency rings.

    Faces of each ring are ordered by centroid distance to the center face's
    centroid, ties by face index. A ring that would overshoot ``patch_faces``
    is truncated in that order, so the patch ends with exactly ``patch_faces``
    members unless the connected component runs out first.

    Args:
        mesh: Source mesh
        center: Face the patch is grown around
        patch_faces: Maximum number of faces (T_f)

    Returns:
        Face ids, center first
    """
    _check_patch_size(patch_faces)
    if not 0 <= center < mesh.n_faces:
        raise MeshIndexError(f"Face {center} does not exist", {"faces": mesh.n_faces})

    adjacency = mesh.face_adjacency
    centers = mesh.face_centers
    pole = centers[center]

    members: List[int] = [center]
    seen = {center}
    frontier = [center]
    while len(members) < patch_faces and frontier:
        ring = sorted(
            {n for face in frontier for n in adjacency[face] if n not in seen}
        )
        if not ring:
            break
        distances = np.linalg.norm(centers[ring] - pole, axis=1)
        # lexsort keys run last-to-first: distance, then index
        order = np.lexsort((np.asarray(ring), distances))
        ring = [ring[i] for i in order]
        ring = ring[: patch_faces - len(members)]
        members.extend(ring)
        seen.update(ring)
        frontier = ring

    return tuple(members)


def generate_patches(mesh: Mesh, patch_faces: int) -> List[Patch]:
    """
    Tile a mesh with overlapping patches until every face has been visited.

    The first patch is centered on face 0. Each following center is the
    unvisited face whose centroid is nearest the previous center's centroid
    (lowest index on ties), which also hops between disconnected components.

    Raises:
        EmptyMesh: If the mesh has no faces
    """
    _check_patch_size(patch_faces)
    if mesh.n_faces == 0:
        raise EmptyMesh(f"{mesh.name} has no faces to patch")

    centers = mesh.face_centers
    visited = np.zeros(mesh.n_faces, dtype=bool)
    patches: List[Patch] = []

    center = 0
    while True:
        faces = grow_patch(mesh, center, patch_faces)
        patches.append(Patch(center_face=center, faces=faces, mesh_ref=mesh.name))
        visited[list(faces)] = True
        if visited.all():
            break
        distances = np.linalg.norm(centers - centers[center], axis=1)
        distances[visited] = np.inf
        center = int(np.argmin(distances))

    logger.info(
        "Split %s into %d patches (T_f=%d)", mesh.name, len(patches), patch_faces
    )
    return patches


def coverage(mesh: Mesh, patches: Sequence[Patch]) -> np.ndarray:
    """Number of patches containing each face."""
    counts = np.zeros(mesh.n_faces, dtype=np.int64)
    for patch in patches:
        counts[list(patch.faces)] += 1
    return counts
