"""
Polar frames erected on faces and the virtual sampling grid.
"""

from dataclasses import dataclass

import numpy as np

from src.mesh.mesh import Mesh, face_frame
from src.utils.error_handling import ContractViolation


@dataclass(frozen=True)
class PolarFrame:
    """
    Origin and zero-angle direction of the polar coordinates on one face.

    ``axis`` points from the face centroid to the midpoint of the edge between
    the face's first and second stored vertices; ``conormal`` is
    ``normal x axis``.
    """

    face_id: int
    pole: np.ndarray
    axis: np.ndarray
    conormal: np.ndarray
    normal: np.ndarray

    def direction(self, phi: float) -> np.ndarray:
        """In-plane unit direction at polar angle ``phi``."""
        return np.cos(phi) * self.axis + np.sin(phi) * self.conormal

    def directions(self, phis: np.ndarray) -> np.ndarray:
        """Vectorized ``direction`` for an array of angles, shape (n, 3)."""
        phis = np.asarray(phis, dtype=np.float64)
        return np.cos(phis)[:, None] * self.axis + np.sin(phis)[:, None] * self.conormal


def build_polar_frame(mesh: Mesh, f: int) -> PolarFrame:
    """
    Build the polar frame of face ``f``.

    Raises:
        ZeroAreaFace: If the face is degenerate
    """
    frame = face_frame(mesh, f)
    v1, v2, _ = mesh.face_corners[f]
    axis = (v1 + v2) / 2.0 - frame.center
    # Already in-plane analytically; strip rounding drift off the normal
    axis = axis - np.dot(axis, frame.normal) * frame.normal
    axis = axis / np.linalg.norm(axis)
    conormal = np.cross(frame.normal, axis)
    return PolarFrame(
        face_id=f,
        pole=frame.center,
        axis=axis,
        conormal=conormal / np.linalg.norm(conormal),
        normal=frame.normal,
    )


@dataclass(frozen=True)
class PolarGrid:
    """
    Virtual Cartesian sampling grid expressed in polar coordinates.

    ``r[a, b]`` and ``phi[a, b]`` belong to grid indices
    ``(i, j) = (indices[a], indices[b])`` with ``i, j`` in ``-T_s+1 .. T_s``.
    """

    indices: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    spacing: float

    @property
    def side(self) -> int:
        return len(self.indices)

    def cartesian(self) -> np.ndarray:
        """(side, side, 2) in-plane offsets (vx, vy) of every grid node."""
        vx = self.indices[:, None] * self.spacing
        vy = self.indices[None, :] * self.spacing
        return np.stack(np.broadcast_arrays(vx, vy), axis=-1)


def virtual_polar_grid(d_a: float, p_s: int, T_s: int) -> PolarGrid:
    """
    Lay the (2 T_s) x (2 T_s) virtual grid with spacing ``d_a / p_s``.

    Args:
        d_a: Average adjacent face-center distance of the mesh
        p_s: Sampling precision (grid nodes per ``d_a``)
        T_s: Half side of the grid

    Returns:
        PolarGrid with radii and quadrant-aware angles
    """
    if not d_a > 0:
        raise ContractViolation(f"d_a must be positive, got {d_a}", {"d_a": d_a})
    if p_s < 1 or T_s < 1:
        raise ContractViolation(
            "Sampling precision and grid half side must be at least 1",
            {"p_s": p_s, "T_s": T_s},
        )

    spacing = d_a / p_s
    indices = np.arange(-T_s + 1, T_s + 1)
    vx = (d_a * indices / p_s)[:, None]
    vy = (d_a * indices / p_s)[None, :]
    vx, vy = np.broadcast_arrays(vx, vy)
    r = np.sqrt(vx**2 + vy**2)
    phi = np.arctan2(vy, vx)
    return PolarGrid(indices=indices, r=r, phi=phi, spacing=spacing)
