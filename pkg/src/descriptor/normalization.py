"""
Patch normalization: rotate the mean normal onto a target axis, center on the
patch-center face and scale into the unit cube; and the exact inverse.
"""

import logging
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from src.descriptor.lsd import LocalSurfaceDescriptor
from src.mesh.mesh import Mesh
from src.mesh.patching import Patch
from src.utils.error_handling import ContractViolation, DegenerateAverageNormal

logger = logging.getLogger(__name__)

TARGET_NORMAL = np.array([1.0, 0.0, 0.0])

PARALLEL_TOLERANCE = 1e-8
DEGENERATE_MEAN_TOLERANCE = 1e-8


def rodrigues_rotation(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """
    Rotation matrix taking unit vector ``source`` onto unit vector ``target``.

    Uses the axis ``source x target`` and angle ``atan2(|s x t|, s . t)``.
    When the two are antiparallel the axis is undefined, so the half-turn about
    whichever of the y or z axes is least parallel to ``source`` (made
    perpendicular to it) is returned instead.
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    source = source / np.linalg.norm(source)
    target = target / np.linalg.norm(target)

    axis = np.cross(source, target)
    sin = float(np.linalg.norm(axis))
    cos = float(np.dot(source, target))

    if sin < PARALLEL_TOLERANCE:
        if cos > 0:
            return np.eye(3)
        candidates = np.eye(3)[1:]
        pick = candidates[np.argmin(np.abs(candidates @ source))]
        pivot = pick - np.dot(pick, source) * source
        pivot /= np.linalg.norm(pivot)
        logger.warning("Mean normal opposes the target; using a half-turn")
        return 2.0 * np.outer(pivot, pivot) - np.eye(3)

    k = axis / sin
    skew = np.array(
        [
            [0.0, -k[2], k[1]],
            [k[2], 0.0, -k[0]],
            [-k[1], k[0], 0.0],
        ]
    )
    theta = np.arctan2(sin, cos)
    return np.eye(3) + np.sin(theta) * skew + (1.0 - np.cos(theta)) * (skew @ skew)


@dataclass(frozen=True)
class NormalizationContext:
    """Everything needed to map normalized patch quantities back to the mesh."""

    rotation: np.ndarray
    c_0: np.ndarray
    M_v: float

    @property
    def inverse_rotation(self) -> np.ndarray:
        return self.rotation.T

    @classmethod
    def identity(cls) -> "NormalizationContext":
        return cls(rotation=np.eye(3), c_0=np.zeros(3), M_v=1.0)

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        """R v for row vectors of any leading shape."""
        return np.asarray(vectors) @ self.rotation.T

    def unrotate(self, vectors: np.ndarray) -> np.ndarray:
        """R^T v for row vectors of any leading shape."""
        return np.asarray(vectors) @ self.rotation

    def to_local(self, points: np.ndarray) -> np.ndarray:
        """R (p - c_0) / M_v."""
        return ((np.asarray(points) - self.c_0) @ self.rotation.T) / self.M_v

    def to_world(self, points: np.ndarray) -> np.ndarray:
        """M_v R^T p + c_0."""
        return self.M_v * (np.asarray(points) @ self.rotation) + self.c_0

    def normalize_spatial(self, spatial: np.ndarray) -> np.ndarray:
        """Map rows ``[pole, axis, v1, v2, v3]`` into the normalized frame."""
        n = len(spatial)
        out = np.empty_like(spatial, dtype=np.float64)
        out[:, 0:3] = self.to_local(spatial[:, 0:3])
        out[:, 3:6] = self.rotate(spatial[:, 3:6])
        out[:, 6:15] = self.to_local(spatial[:, 6:15].reshape(n, 3, 3)).reshape(n, 9)
        return out


def patch_mean_normal(
    mesh: Mesh, patch: Patch, center_fallback: bool = False
) -> np.ndarray:
    """
    Normalized mean of the member face normals.

    Args:
        mesh: Source mesh
        patch: Patch whose normals are averaged
        center_fallback: Return the center face's normal instead of raising
            when the mean vanishes, as it does for a patch covering a whole
            closed surface

    Raises:
        DegenerateAverageNormal: If the mean (nearly) vanishes and
            ``center_fallback`` is off
    """
    mean = mesh.face_normals[list(patch.faces)].mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm >= DEGENERATE_MEAN_TOLERANCE:
        return mean / norm
    if center_fallback:
        center = mesh.face_normals[patch.center_face]
        if np.linalg.norm(center) > 0:
            logger.warning(
                "Mean normal of the patch around face %d vanishes; "
                "using the center face normal",
                patch.center_face,
            )
            return center / np.linalg.norm(center)
    raise DegenerateAverageNormal(
        f"Mean normal of the patch around face {patch.center_face} vanishes",
        {"center_face": patch.center_face, "norm": norm},
    )


def normalize_patch(
    lsd: LocalSurfaceDescriptor,
    patch: Patch,
    mesh: Mesh,
    n_t: np.ndarray = TARGET_NORMAL,
    center_fallback: bool = False,
) -> Tuple[LocalSurfaceDescriptor, NormalizationContext]:
    """
    Normalize a patch descriptor for the network.

    Normals and axes are rotated by R, which takes the patch's mean face
    normal onto ``n_t``. Poles and vertices become ``R (x - c_0) / M_v`` with
    ``c_0`` the center face's centroid and ``M_v`` the largest absolute
    coordinate among the rotated, centered poles and vertices, so every
    normalized coordinate lies in [-1, 1].

    Args:
        lsd: Descriptor of the patch's faces, in world coordinates
        patch: The patch ``lsd`` was built from
        mesh: Source mesh
        n_t: Target direction for the mean normal
        center_fallback: Forwarded to ``patch_mean_normal``

    Returns:
        Tuple of (normalized descriptor, context for the inverse mapping)

    Raises:
        ContractViolation: If the patch is empty
        DegenerateAverageNormal: If the patch's normals cancel out and
            ``center_fallback`` is off
    """
    if patch.size == 0:
        raise ContractViolation("Cannot normalize an empty patch")
    if lsd.size != patch.size:
        raise ContractViolation(
            "Descriptor and patch sizes differ",
            {"descriptor": lsd.size, "patch": patch.size},
        )

    rotation = rodrigues_rotation(
        patch_mean_normal(mesh, patch, center_fallback), n_t
    )
    c_0 = mesh.face_centers[patch.center_face].copy()

    n = lsd.size
    points = np.concatenate(
        [lsd.spatial[:, 0:3], lsd.spatial[:, 6:15].reshape(n * 3, 3)], axis=0
    )
    extent = float(np.max(np.abs((points - c_0) @ rotation.T)))
    ctx = NormalizationContext(
        rotation=rotation, c_0=c_0, M_v=extent if extent > 0 else 1.0
    )

    normalized = replace(
        lsd,
        grids=ctx.rotate(lsd.grids),
        spatial=ctx.normalize_spatial(lsd.spatial),
    )
    return normalized, ctx


def denormalize(
    normals: np.ndarray, vertices: np.ndarray, ctx: NormalizationContext
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Map normalized per-face normals and vertex triples back to world space.

    Args:
        normals: (n, 3) normals in the normalized frame
        vertices: (n, 9) or (n, 3, 3) vertex triples in the normalized frame
        ctx: Context returned by ``normalize_patch`` for the same patch

    Returns:
        Tuple of (R^T n, M_v R^T v + c_0), with the input shapes
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    shape = vertices.shape
    world_vertices = ctx.to_world(vertices.reshape(-1, 3)).reshape(shape)
    return ctx.unrotate(normals), world_vertices
