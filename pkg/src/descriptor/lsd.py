"""
Local Surface Descriptors.

Each face contributes a (2 T_s) x (2 T_s) grid of surface normals sampled by
geodesic tracing from its polar frame, plus a 15-value spatial row
``[pole, axis, v1, v2, v3]``. Neither part depends on which patch the face
belongs to, so the per-face data is computed once per mesh in a
``FaceDescriptorTable`` and patches slice it.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.descriptor.geodesic import surface_walker
from src.descriptor.polar import PolarGrid, build_polar_frame, virtual_polar_grid
from src.mesh.mesh import Mesh, average_adjacent_center_distance
from src.mesh.patching import Patch
from src.utils.error_handling import ContractViolation, MeshIndexError

logger = logging.getLogger(__name__)

SPATIAL_WIDTH = 15


@dataclass(frozen=True)
class LocalSurfaceDescriptor:
    """
    Descriptor of an ordered set of faces.

    Attributes:
        grids: (n, 2 T_s, 2 T_s, 3) sampled normals
        spatial: (n, 15) rows ``[pole, axis, v1, v2, v3]``
        valid: (n, 2 T_s, 2 T_s) False where the trace left the mesh
        face_ids: Source face of each row, when known
    """

    grids: np.ndarray
    spatial: np.ndarray
    valid: np.ndarray
    face_ids: Tuple[int, ...] = ()

    @property
    def size(self) -> int:
        return len(self.spatial)

    @property
    def grid_side(self) -> int:
        return self.grids.shape[1]

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean()) if self.valid.size else 1.0


@dataclass(frozen=True)
class FaceDescriptorTable:
    """Per-face descriptor data for a set of faces of one mesh."""

    face_ids: np.ndarray
    grids: np.ndarray
    spatial: np.ndarray
    valid: np.ndarray
    d_a: float
    p_s: int
    T_s: int

    def rows(self, faces: Sequence[int]) -> np.ndarray:
        """Row index of each requested face."""
        lookup = np.full(int(self.face_ids.max(initial=-1)) + 1, -1, dtype=np.int64)
        lookup[self.face_ids] = np.arange(len(self.face_ids))
        faces = np.asarray(faces, dtype=np.int64)
        if len(faces) and (faces.max() >= len(lookup) or (lookup[faces] < 0).any()):
            raise MeshIndexError(
                "Requested faces are missing from the descriptor table",
                {"faces": faces.tolist()},
            )
        return lookup[faces]

    def select(self, faces: Sequence[int]) -> LocalSurfaceDescriptor:
        rows = self.rows(faces)
        return LocalSurfaceDescriptor(
            grids=self.grids[rows],
            spatial=self.spatial[rows],
            valid=self.valid[rows],
            face_ids=tuple(int(f) for f in faces),
        )


def _describe_faces(
    mesh: Mesh, faces: List[int], grid: PolarGrid
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    walker = surface_walker(mesh)
    side = grid.side
    grids = np.empty((len(faces), side, side, 3))
    valid = np.empty((len(faces), side, side), dtype=bool)
    spatial = np.empty((len(faces), SPATIAL_WIDTH))
    radii, angles = grid.r.ravel(), grid.phi.ravel()
    for row, f in enumerate(faces):
        frame = build_polar_frame(mesh, f)
        batch = walker.trace(frame, radii, angles)
        grids[row] = batch.normals.reshape(side, side, 3)
        valid[row] = batch.valid.reshape(side, side)
        spatial[row] = np.concatenate(
            [frame.pole, frame.axis, mesh.face_corners[f].ravel()]
        )
    return grids, valid, spatial


def _chunks(items: List[int], count: int) -> Iterable[List[int]]:
    size = max(1, -(-len(items) // count))
    for start in range(0, len(items), size):
        yield items[start : start + size]


def compute_face_descriptors(
    mesh: Mesh,
    p_s: int,
    T_s: int,
    d_a: Optional[float] = None,
    faces: Optional[Sequence[int]] = None,
    workers: int = 1,
) -> FaceDescriptorTable:
    """
    Sample the normal grid and spatial row of every requested face.

    Args:
        mesh: Source mesh
        p_s: Sampling precision
        T_s: Grid half side
        d_a: Mesh scale; computed from the mesh when omitted
        faces: Faces to describe (all faces by default)
        workers: Processes to spread faces over; each writes its own rows

    Returns:
        FaceDescriptorTable for the requested faces

    Raises:
        NoAdjacency: If ``d_a`` must be computed and no faces share an edge
        ZeroAreaFace: If a requested face is degenerate
    """
    if d_a is None:
        d_a = average_adjacent_center_distance(mesh)
    grid = virtual_polar_grid(d_a, p_s, T_s)
    face_list = list(range(mesh.n_faces)) if faces is None else [int(f) for f in faces]

    if workers > 1 and len(face_list) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(_describe_faces, mesh, chunk, grid)
                for chunk in _chunks(face_list, workers)
            ]
            parts = [future.result() for future in futures]
        grids = np.concatenate([part[0] for part in parts])
        valid = np.concatenate([part[1] for part in parts])
        spatial = np.concatenate([part[2] for part in parts])
    else:
        grids, valid, spatial = _describe_faces(mesh, face_list, grid)

    if valid.size:
        invalid = 1.0 - float(valid.mean())
        log = logger.warning if invalid > 0.5 else logger.debug
        log("%.1f%% of %s samples left the surface", 100.0 * invalid, mesh.name)
    logger.info(
        "Described %d faces of %s (d_a=%.6g, grid %dx%d)",
        len(face_list),
        mesh.name,
        d_a,
        grid.side,
        grid.side,
    )
    return FaceDescriptorTable(
        face_ids=np.asarray(face_list, dtype=np.int64),
        grids=grids,
        spatial=spatial,
        valid=valid,
        d_a=float(d_a),
        p_s=p_s,
        T_s=T_s,
    )


def build_patch_lsd(
    mesh: Mesh,
    patch: Patch,
    d_a: float,
    p_s: int,
    T_s: int,
    table: Optional[FaceDescriptorTable] = None,
) -> LocalSurfaceDescriptor:
    """
    Assemble the descriptor of a patch, rows in patch order.

    When ``table`` is given its rows are reused; it must have been built with
    the same ``d_a``, ``p_s`` and ``T_s``.
    """
    if table is None:
        table = compute_face_descriptors(mesh, p_s, T_s, d_a=d_a, faces=patch.faces)
    elif (table.p_s, table.T_s) != (p_s, T_s) or not np.isclose(table.d_a, d_a):
        raise ContractViolation(
            "Descriptor table was built with different sampling parameters",
            {
                "table": [table.d_a, table.p_s, table.T_s],
                "requested": [d_a, p_s, T_s],
            },
        )
    return table.select(patch.faces)
