"""
Indexed triangle mesh with derived adjacency and per-face geometry.

A ``Mesh`` is immutable once built: its arrays are flagged read-only and all
derived quantities are cached, so one instance can be shared freely between
workers.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.utils.error_handling import (
    DegenerateFace,
    EmptyMesh,
    MeshIndexError,
    NoAdjacency,
    ShapeMismatch,
    ZeroAreaFace,
)

logger = logging.getLogger(__name__)

# Relative to the squared longest edge of the face
ZERO_AREA_TOLERANCE = 1e-12

Edge = Tuple[int, int]


def edge_key(a: int, b: int) -> Edge:
    """Undirected edge key: the sorted vertex-index pair."""
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class FaceFrame:
    """Center, unit normal and area of one face."""

    face_id: int
    center: np.ndarray
    normal: np.ndarray
    area: float


class Mesh:
    """Triangle mesh: vertex positions, vertex-index triples and adjacency."""

    def __init__(
        self,
        vertices: Sequence[Sequence[float]],
        faces: Sequence[Sequence[int]],
        name: str = "mesh",
    ):
        vertex_array = np.array(vertices, dtype=np.float64)
        if vertex_array.size == 0:
            vertex_array = vertex_array.reshape(0, 3)
        face_array = np.array(faces, dtype=np.int64)
        if face_array.size == 0:
            face_array = face_array.reshape(0, 3)

        if vertex_array.ndim != 2 or vertex_array.shape[1] != 3:
            raise ShapeMismatch(
                "Vertices must be an (n, 3) array",
                {"shape": list(vertex_array.shape)},
            )
        if face_array.ndim != 2 or face_array.shape[1] != 3:
            raise ShapeMismatch(
                "Faces must be an (m, 3) array of vertex indices",
                {"shape": list(face_array.shape)},
            )

        _validate_faces(face_array, len(vertex_array))

        vertex_array.setflags(write=False)
        face_array.setflags(write=False)
        self._vertices = vertex_array
        self._faces = face_array
        self.name = name

    def __repr__(self) -> str:
        return f"Mesh(name={self.name!r}, vertices={self.n_vertices}, faces={self.n_faces})"

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    @property
    def faces(self) -> np.ndarray:
        return self._faces

    @property
    def n_vertices(self) -> int:
        return len(self._vertices)

    @property
    def n_faces(self) -> int:
        return len(self._faces)

    def with_vertices(self, vertices: np.ndarray, name: Optional[str] = None) -> "Mesh":
        """Return a mesh with the same faces and new vertex positions."""
        vertex_array = np.asarray(vertices, dtype=np.float64)
        if vertex_array.shape != self._vertices.shape:
            raise ShapeMismatch(
                "Replacement vertices must match the original vertex array",
                {
                    "expected": list(self._vertices.shape),
                    "actual": list(vertex_array.shape),
                },
            )
        mesh = Mesh.__new__(Mesh)
        vertex_array = vertex_array.copy()
        vertex_array.setflags(write=False)
        mesh._vertices = vertex_array
        mesh._faces = self._faces
        mesh.name = name or self.name
        # Topology is shared, so the edge map can be reused as-is
        if "edge_faces" in self.__dict__:
            mesh.__dict__["edge_faces"] = self.__dict__["edge_faces"]
        return mesh

    @cached_property
    def edge_faces(self) -> Dict[Edge, Tuple[int, ...]]:
        """Map from undirected edge to the ascending ids of its incident faces."""
        table: Dict[Edge, List[int]] = {}
        for face_id, (a, b, c) in enumerate(self._faces.tolist()):
            for u, v in ((a, b), (b, c), (c, a)):
                table.setdefault(edge_key(u, v), []).append(face_id)
        non_manifold = sum(1 for members in table.values() if len(members) > 2)
        if non_manifold:
            logger.debug("%s has %d non-manifold edges", self.name, non_manifold)
        return {key: tuple(sorted(set(members))) for key, members in table.items()}

    @cached_property
    def face_adjacency(self) -> Tuple[Tuple[int, ...], ...]:
        """Per face, the ascending ids of faces sharing at least one edge."""
        neighbours: List[set] = [set() for _ in range(self.n_faces)]
        for members in self.edge_faces.values():
            for face_id in members:
                neighbours[face_id].update(members)
        return tuple(
            tuple(sorted(found - {face_id})) for face_id, found in enumerate(neighbours)
        )

    @cached_property
    def vertex_faces(self) -> Tuple[Tuple[int, ...], ...]:
        """Per vertex, the ascending ids of incident faces."""
        incident: List[List[int]] = [[] for _ in range(self.n_vertices)]
        for face_id, corners in enumerate(self._faces.tolist()):
            for vertex_id in corners:
                incident[vertex_id].append(face_id)
        return tuple(tuple(faces) for faces in incident)

    @cached_property
    def face_corners(self) -> np.ndarray:
        """(m, 3, 3) vertex positions of every face, in stored order."""
        corners = self._vertices[self._faces]
        corners.setflags(write=False)
        return corners

    @cached_property
    def face_centers(self) -> np.ndarray:
        centers = self.face_corners.mean(axis=1)
        centers.setflags(write=False)
        return centers

    @cached_property
    def _face_cross(self) -> np.ndarray:
        corners = self.face_corners
        return np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])

    @cached_property
    def face_areas(self) -> np.ndarray:
        areas = 0.5 * np.linalg.norm(self._face_cross, axis=1)
        areas.setflags(write=False)
        return areas

    @cached_property
    def face_normals(self) -> np.ndarray:
        """Unit face normals; zero rows for faces with numerically zero area."""
        cross = self._face_cross
        norms = np.linalg.norm(cross, axis=1)
        corners = self.face_corners
        longest_sq = np.max(
            np.sum((np.roll(corners, -1, axis=1) - corners) ** 2, axis=2), axis=1
        )
        usable = norms > ZERO_AREA_TOLERANCE * longest_sq
        normals = np.zeros_like(cross)
        normals[usable] = cross[usable] / norms[usable, None]
        normals.setflags(write=False)
        return normals


def _validate_faces(faces: np.ndarray, vertex_count: int) -> None:
    if len(faces) == 0:
        return
    out_of_range = (faces < 0) | (faces >= vertex_count)
    if out_of_range.any():
        face_id = int(np.flatnonzero(out_of_range.any(axis=1))[0])
        raise MeshIndexError(
            f"Face {face_id} references a vertex outside 0..{vertex_count - 1}",
            {"face": face_id, "indices": faces[face_id].tolist()},
        )
    repeated = (
        (faces[:, 0] == faces[:, 1])
        | (faces[:, 1] == faces[:, 2])
        | (faces[:, 0] == faces[:, 2])
    )
    if repeated.any():
        face_id = int(np.flatnonzero(repeated)[0])
        raise DegenerateFace(
            f"Face {face_id} repeats a vertex index",
            {"face": face_id, "indices": faces[face_id].tolist()},
        )


def face_frame(mesh: Mesh, f: int) -> FaceFrame:
    """
    Compute the center, unit normal and area of face ``f``.

    The normal follows the stored winding: (v2 - v1) x (v3 - v1), normalized.

    Raises:
        MeshIndexError: If ``f`` is not a face of the mesh
        ZeroAreaFace: If the face is numerically degenerate
    """
    if not 0 <= f < mesh.n_faces:
        raise MeshIndexError(f"Face {f} does not exist", {"faces": mesh.n_faces})

    v1, v2, v3 = mesh.face_corners[f]
    cross = np.cross(v2 - v1, v3 - v1)
    norm = float(np.linalg.norm(cross))
    longest_sq = max(
        float(np.dot(v2 - v1, v2 - v1)),
        float(np.dot(v3 - v2, v3 - v2)),
        float(np.dot(v1 - v3, v1 - v3)),
    )
    if not norm > ZERO_AREA_TOLERANCE * longest_sq:
        raise ZeroAreaFace(
            f"Face {f} has zero area", {"face": f, "cross_norm": norm}
        )

    return FaceFrame(
        face_id=f,
        center=(v1 + v2 + v3) / 3.0,
        normal=cross / norm,
        area=0.5 * norm,
    )


def adjacent_face_pairs(mesh: Mesh) -> np.ndarray:
    """(k, 2) array of unordered adjacent face pairs (i < j), ascending."""
    pairs = [
        (i, j)
        for i, neighbours in enumerate(mesh.face_adjacency)
        for j in neighbours
        if i < j
    ]
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def average_adjacent_center_distance(mesh: Mesh) -> float:
    """
    Mean Euclidean distance between the centers of edge-adjacent faces.

    Raises:
        NoAdjacency: If no two faces share an edge
    """
    pairs = adjacent_face_pairs(mesh)
    if len(pairs) == 0:
        raise NoAdjacency(
            f"{mesh.name} has no faces sharing an edge", {"faces": mesh.n_faces}
        )
    centers = mesh.face_centers
    distances = np.linalg.norm(centers[pairs[:, 0]] - centers[pairs[:, 1]], axis=1)
    return float(distances.mean())


def average_edge_length(mesh: Mesh) -> float:
    """
    Mean length over unique undirected edges.

    Raises:
        EmptyMesh: If the mesh has no edges
    """
    if not mesh.edge_faces:
        raise EmptyMesh(f"{mesh.name} has no edges", {"faces": mesh.n_faces})
    edges = np.array(list(mesh.edge_faces.keys()), dtype=np.int64)
    vertices = mesh.vertices
    lengths = np.linalg.norm(vertices[edges[:, 0]] - vertices[edges[:, 1]], axis=1)
    return float(lengths.mean())
