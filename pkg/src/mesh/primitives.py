"""
Procedural test shapes.

Closed shapes are wound so every face normal points away from the shape's
centroid; open shapes (grid, strip) face +z on their flat part.
"""

import math
from typing import Dict, List, Tuple

import numpy as np

from src.mesh.mesh import Mesh
from src.utils.error_handling import ShapeMismatch

_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

_ICOSAHEDRON_VERTICES = [
    (-1, _GOLDEN, 0),
    (1, _GOLDEN, 0),
    (-1, -_GOLDEN, 0),
    (1, -_GOLDEN, 0),
    (0, -1, _GOLDEN),
    (0, 1, _GOLDEN),
    (0, -1, -_GOLDEN),
    (0, 1, -_GOLDEN),
    (_GOLDEN, 0, -1),
    (_GOLDEN, 0, 1),
    (-_GOLDEN, 0, -1),
    (-_GOLDEN, 0, 1),
]

_ICOSAHEDRON_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]  # fmt: skip


def _orient_outward(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Flip faces whose normal points toward the vertex centroid."""
    centroid = vertices.mean(axis=0)
    corners = vertices[faces]
    normals = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    outward = np.einsum("ij,ij->i", normals, corners.mean(axis=1) - centroid)
    fixed = faces.copy()
    inward = outward < 0
    fixed[inward] = fixed[inward][:, [0, 2, 1]]
    return fixed


def icosahedron(radius: float = 1.0) -> Mesh:
    """Regular icosahedron inscribed in a sphere of ``radius`` (20 faces)."""
    vertices = np.array(_ICOSAHEDRON_VERTICES, dtype=np.float64)
    vertices *= radius / np.linalg.norm(vertices, axis=1, keepdims=True)
    faces = _orient_outward(vertices, np.array(_ICOSAHEDRON_FACES, dtype=np.int64))
    return Mesh(vertices, faces, name="icosahedron")


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> Mesh:
    """
    Sphere from repeated midpoint subdivision of an icosahedron.

    Each level quadruples the face count: 3 levels give 1280 faces.
    """
    if subdivisions < 0:
        raise ShapeMismatch(
            "Subdivision level must not be negative", {"subdivisions": subdivisions}
        )
    base = icosahedron(1.0)
    vertices: List[np.ndarray] = [row.copy() for row in base.vertices]
    faces: List[Tuple[int, int, int]] = [tuple(f) for f in base.faces.tolist()]

    for _ in range(subdivisions):
        midpoints: Dict[Tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoints:
                point = (vertices[a] + vertices[b]) / 2.0
                vertices.append(point / np.linalg.norm(point))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        faces = refined

    vertex_array = np.array(vertices) * radius
    face_array = _orient_outward(vertex_array, np.array(faces, dtype=np.int64))
    return Mesh(vertex_array, face_array, name=f"icosphere{subdivisions}")


def unit_cube() -> Mesh:
    """Axis-aligned unit cube [0, 1]^3 split into 12 triangles."""
    vertices = np.array(
        [
            (0, 0, 0),
            (1, 0, 0),
            (1, 1, 0),
            (0, 1, 0),
            (0, 0, 1),
            (1, 0, 1),
            (1, 1, 1),
            (0, 1, 1),
        ],
        dtype=np.float64,
    )
    quads = [
        (0, 3, 2, 1),  # z = 0
        (4, 5, 6, 7),  # z = 1
        (0, 1, 5, 4),  # y = 0
        (2, 3, 7, 6),  # y = 1
        (0, 4, 7, 3),  # x = 0
        (1, 2, 6, 5),  # x = 1
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append((a, b, c))
        faces.append((a, c, d))
    face_array = _orient_outward(vertices, np.array(faces, dtype=np.int64))
    return Mesh(vertices, face_array, name="cube")


def regular_tetrahedron(edge: float = 1.0) -> Mesh:
    """Regular tetrahedron centered at the origin."""
    vertices = np.array(
        [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)], dtype=np.float64
    )
    vertices *= edge / (2.0 * math.sqrt(2.0))
    faces = np.array([(0, 1, 2), (0, 3, 1), (0, 2, 3), (1, 3, 2)], dtype=np.int64)
    return Mesh(vertices, _orient_outward(vertices, faces), name="tetrahedron")


def planar_grid(nx: int, ny: int, spacing: float = 1.0) -> Mesh:
    """
    Flat ``nx`` x ``ny`` grid of square cells in the z = 0 plane.

    Each cell is split along its diagonal, so the grid has 2 * nx * ny faces,
    all with normal +z.
    """
    if nx < 1 or ny < 1:
        raise ShapeMismatch("Grid needs at least one cell per side", {"nx": nx, "ny": ny})
    xs, ys = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
    vertices = np.stack(
        [xs.ravel() * spacing, ys.ravel() * spacing, np.zeros(xs.size)], axis=1
    )

    def index(i: int, j: int) -> int:
        return j * (nx + 1) + i

    faces = []
    for j in range(ny):
        for i in range(nx):
            a, b = index(i, j), index(i + 1, j)
            c, d = index(i + 1, j + 1), index(i, j + 1)
            faces.append((a, b, c))
            faces.append((a, c, d))
    return Mesh(vertices, faces, name=f"grid{nx}x{ny}")


def single_triangle() -> Mesh:
    return Mesh(
        [(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)], [(0, 1, 2)], name="triangle"
    )


def fold_point(u: float, v: float, fold_at: float, angle: float) -> np.ndarray:
    """Map a point of the developed strip onto the folded surface."""
    if u <= fold_at:
        return np.array([u, v, 0.0])
    s = u - fold_at
    return np.array([fold_at + s * math.cos(angle), v, s * math.sin(angle)])


def folded_strip(
    columns: int = 8,
    rows: int = 4,
    fold_column: int = 4,
    angle: float = math.pi / 2,
    spacing: float = 0.25,
) -> Mesh:
    """
    Planar grid bent upward along the vertical line ``u = fold_column * spacing``.

    The fold keeps the strip developable: its unfolding is exactly the flat
    grid, which ``fold_point`` maps back onto the surface.
    """
    if not 0 < fold_column < columns:
        raise ShapeMismatch(
            "Fold must lie strictly inside the strip",
            {"columns": columns, "fold_column": fold_column},
        )
    flat = planar_grid(columns, rows, spacing)
    fold_at = fold_column * spacing
    vertices = np.array(
        [fold_point(u, v, fold_at, angle) for u, v, _ in flat.vertices.tolist()]
    )
    return Mesh(vertices, flat.faces, name="folded_strip")
