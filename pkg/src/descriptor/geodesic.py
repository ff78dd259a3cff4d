"""
Straightest-path tracing over a triangle mesh by edge unfolding.

A trace walks a straight segment inside the current face. When it reaches an
edge, the neighbouring face is hinged about that edge into the current plane
and the walk continues, so the polyline is a geodesic of the developed strip
of faces it crosses. Rays from one pole are traced together in numpy batches.
"""

import logging
import weakref
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.descriptor.polar import PolarFrame
from src.mesh.mesh import Mesh, edge_key

logger = logging.getLogger(__name__)

# Fraction of an edge length; closer than this to a corner counts as a vertex hit
VERTEX_TOLERANCE = 1e-9
# Slack on the edge parameter when accepting an exit edge
EDGE_SLACK = 1e-6
GRAZE_PERTURBATION = 1e-7
MAX_GRAZE_RETRIES = 3
MAX_STEPS = 100_000

_ACTIVE, _DONE, _BOUNDARY, _GRAZED, _STUCK = range(5)


@dataclass(frozen=True)
class SamplePoint:
    """
    End point of one geodesic trace.

    ``angle`` is the launch angle actually used, which differs from the
    requested one when a vertex hit forced a perturbed restart. ``path`` holds
    the traced polyline when it was requested.
    """

    position: np.ndarray
    host_face: int
    normal: np.ndarray
    valid: bool
    angle: float
    path: Optional[Tuple[np.ndarray, ...]] = None


@dataclass
class SampleBatch:
    """Struct-of-arrays result of tracing many rays from one pole."""

    positions: np.ndarray
    host_faces: np.ndarray
    normals: np.ndarray
    valid: np.ndarray
    angles: np.ndarray
    paths: Optional[List[List[np.ndarray]]] = None

    def __len__(self) -> int:
        return len(self.host_faces)

    def __getitem__(self, index: int) -> SamplePoint:
        path = None
        if self.paths is not None:
            path = tuple(self.paths[index])
        return SamplePoint(
            position=self.positions[index],
            host_face=int(self.host_faces[index]),
            normal=self.normals[index],
            valid=bool(self.valid[index]),
            angle=float(self.angles[index]),
            path=path,
        )


class SurfaceWalker:
    """
    Per-mesh lookup tables for tracing.

    Local edge ``k`` of a face runs from its corner ``k`` to corner ``k + 1``.
    ``neighbours[f, k]`` is the lowest-index other face on that edge, or -1
    when the edge is a boundary or that face is degenerate;
    ``neighbour_slot[f, k]`` is the same edge's local index inside the
    neighbour.
    """

    def __init__(self, mesh: Mesh):
        self.mesh_name = mesh.name
        self.corners = mesh.face_corners
        self.normals = mesh.face_normals
        faces = mesh.faces.tolist()
        usable = np.linalg.norm(self.normals, axis=1) > 0

        self.neighbours = np.full((mesh.n_faces, 3), -1, dtype=np.int64)
        self.neighbour_slot = np.full((mesh.n_faces, 3), -1, dtype=np.int64)
        edge_faces = mesh.edge_faces
        for f, corners in enumerate(faces):
            for k in range(3):
                a, b = corners[k], corners[(k + 1) % 3]
                others = [g for g in edge_faces[edge_key(a, b)] if g != f]
                if not others or not usable[others[0]]:
                    continue
                g = others[0]
                self.neighbours[f, k] = g
                self.neighbour_slot[f, k] = _edge_slot(faces[g], a, b)

    def trace(
        self,
        frame: PolarFrame,
        radii: np.ndarray,
        angles: np.ndarray,
        record_paths: bool = False,
    ) -> SampleBatch:
        """Trace rays from ``frame.pole``; rays grazing a vertex are relaunched."""
        radii = np.asarray(radii, dtype=np.float64).ravel()
        angles = np.asarray(angles, dtype=np.float64).ravel().copy()
        result = self._walk(frame, radii, angles, record_paths)

        for retry in range(1, MAX_GRAZE_RETRIES + 1):
            grazed = np.flatnonzero(result.status == _GRAZED)
            if len(grazed) == 0:
                break
            angles[grazed] += GRAZE_PERTURBATION
            redo = self._walk(frame, radii[grazed], angles[grazed], record_paths)
            result.replace(grazed, redo)
            logger.debug(
                "Face %d: relaunched %d rays after a vertex hit (retry %d)",
                frame.face_id,
                len(grazed),
                retry,
            )

        return SampleBatch(
            positions=result.positions,
            host_faces=result.faces,
            normals=self.normals[result.faces],
            valid=result.status == _DONE,
            angles=angles,
            paths=result.paths,
        )

    def _walk(
        self,
        frame: PolarFrame,
        radii: np.ndarray,
        angles: np.ndarray,
        record_paths: bool,
    ) -> "_WalkState":
        n = len(radii)
        state = _WalkState(
            positions=np.tile(frame.pole, (n, 1)),
            directions=frame.directions(angles),
            remaining=radii.copy(),
            faces=np.full(n, frame.face_id, dtype=np.int64),
            entry=np.full(n, -1, dtype=np.int64),
            status=np.where(radii > 0, _ACTIVE, _DONE).astype(np.int8),
            paths=[[frame.pole.copy()] for _ in range(n)] if record_paths else None,
        )

        for _ in range(MAX_STEPS):
            active = np.flatnonzero(state.status == _ACTIVE)
            if len(active) == 0:
                break
            self._step(state, active)
        else:
            stuck = state.status == _ACTIVE
            state.status[stuck] = _STUCK
            logger.warning("%d traces exceeded %d steps", int(stuck.sum()), MAX_STEPS)

        if state.paths is not None:
            for ray, path in enumerate(state.paths):
                path.append(state.positions[ray].copy())
        return state

    def _step(self, state: "_WalkState", active: np.ndarray) -> None:
        faces = state.faces[active]
        corners = self.corners[faces]
        normals = self.normals[faces]
        edges = np.roll(corners, -1, axis=1) - corners
        points = state.positions[active]
        directions = state.directions[active]
        remaining = state.remaining[active]
        rows = np.arange(len(active))

        # p + t d = P + s E, solved inside the face plane
        offsets = corners - points[:, None, :]
        denom = np.einsum("mi,mki->mk", normals, np.cross(directions[:, None, :], edges))
        t_num = np.einsum("mi,mki->mk", normals, np.cross(offsets, edges))
        s_num = np.einsum("mi,mki->mk", normals, np.cross(offsets, directions[:, None, :]))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = t_num / denom
            s = s_num / denom
        candidate = (
            np.isfinite(t) & (t > 0) & (s >= -EDGE_SLACK) & (s <= 1.0 + EDGE_SLACK)
        )
        entered = state.entry[active]
        has_entry = entered >= 0
        candidate[rows[has_entry], entered[has_entry]] = False

        t = np.where(candidate, t, np.inf)
        exit_slot = np.argmin(t, axis=1)
        t_exit = t[rows, exit_slot]
        s_exit = s[rows, exit_slot]

        stuck = np.isinf(t_exit)
        finish = ~stuck & (t_exit >= remaining)
        crossing = ~stuck & ~finish
        grazed = crossing & (
            (s_exit < VERTEX_TOLERANCE) | (s_exit > 1.0 - VERTEX_TOLERANCE)
        )
        crossing &= ~grazed

        idx = active[finish]
        state.positions[idx] = points[finish] + remaining[finish, None] * directions[finish]
        state.remaining[idx] = 0.0
        state.status[idx] = _DONE

        state.status[active[stuck]] = _STUCK
        if stuck.any():
            logger.debug("%d traces found no exit edge", int(stuck.sum()))

        idx = active[grazed]
        state.positions[idx] = points[grazed] + t_exit[grazed, None] * directions[grazed]
        state.status[idx] = _GRAZED

        if not crossing.any():
            return

        cross_rows = rows[crossing]
        slot = exit_slot[crossing]
        start = corners[cross_rows, slot]
        edge = edges[cross_rows, slot]
        # Snap onto the shared edge so both faces agree on the crossing point
        hit = start + np.clip(s_exit[crossing], 0.0, 1.0)[:, None] * edge
        neighbour = self.neighbours[faces[crossing], slot]

        boundary = neighbour < 0
        idx = active[crossing][boundary]
        state.positions[idx] = hit[boundary]
        state.status[idx] = _BOUNDARY

        moving = ~boundary
        if not moving.any():
            return
        idx = active[crossing][moving]
        start, edge, hit = start[moving], edge[moving], hit[moving]
        if state.paths is not None:
            for ray, point in zip(idx, hit):
                state.paths[ray].append(point.copy())
        neighbour = neighbour[moving]
        entry_slot = self.neighbour_slot[faces[crossing][moving], slot[moving]]
        direction = directions[crossing][moving]

        # Unfold: keep the along-edge component, carry the across-edge
        # component onto the neighbour's inward perpendicular
        unit_edge = edge / np.linalg.norm(edge, axis=1, keepdims=True)
        along = np.einsum("mi,mi->m", direction, unit_edge)
        apex = self.corners[neighbour, (entry_slot + 2) % 3] - start
        inward = apex - np.einsum("mi,mi->m", apex, unit_edge)[:, None] * unit_edge
        inward /= np.linalg.norm(inward, axis=1, keepdims=True)
        across = np.sqrt(np.clip(1.0 - along**2, 0.0, None))
        turned = along[:, None] * unit_edge + across[:, None] * inward
        turned /= np.linalg.norm(turned, axis=1, keepdims=True)

        state.remaining[idx] = remaining[crossing][moving] - t_exit[crossing][moving]
        state.positions[idx] = hit
        state.directions[idx] = turned
        state.faces[idx] = neighbour
        state.entry[idx] = entry_slot


@dataclass
class _WalkState:
    positions: np.ndarray
    directions: np.ndarray
    remaining: np.ndarray
    faces: np.ndarray
    entry: np.ndarray
    status: np.ndarray
    paths: Optional[List[List[np.ndarray]]]

    def replace(self, rows: np.ndarray, other: "_WalkState") -> None:
        self.positions[rows] = other.positions
        self.directions[rows] = other.directions
        self.remaining[rows] = other.remaining
        self.faces[rows] = other.faces
        self.entry[rows] = other.entry
        self.status[rows] = other.status
        if self.paths is not None and other.paths is not None:
            for row, path in zip(rows, other.paths):
                self.paths[row] = path


def _edge_slot(corners: List[int], a: int, b: int) -> int:
    for k in range(3):
        if {corners[k], corners[(k + 1) % 3]} == {a, b}:
            return k
    raise ValueError(f"Edge ({a}, {b}) is not on face {corners}")


_walkers: "weakref.WeakKeyDictionary[Mesh, SurfaceWalker]" = weakref.WeakKeyDictionary()


def surface_walker(mesh: Mesh) -> SurfaceWalker:
    """Return the (cached) walker for ``mesh``."""
    walker = _walkers.get(mesh)
    if walker is None:
        walker = SurfaceWalker(mesh)
        _walkers[mesh] = walker
    return walker


def trace_geodesic(
    mesh: Mesh,
    frame: PolarFrame,
    r: float,
    phi: float,
    record_path: bool = False,
) -> SamplePoint:
    """
    Walk distance ``r`` over the surface from the pole at polar angle ``phi``.

    Args:
        mesh: Mesh the frame was built on
        frame: Polar frame of the starting face
        r: Geodesic length, non-negative
        phi: Launch angle measured from ``frame.axis`` toward ``frame.conormal``
        record_path: Also return the traced polyline

    Returns:
        SamplePoint; ``valid`` is False when the walk left the mesh through a
        boundary edge or could not avoid a vertex
    """
    batch = surface_walker(mesh).trace(
        frame, np.array([r], dtype=np.float64), np.array([phi]), record_path
    )
    return batch[0]
