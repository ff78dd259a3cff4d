"""
Uniform-grid nearest-neighbour search.
"""

from typing import Dict, Tuple

import numpy as np

from src.utils.error_handling import EmptyMesh

Cell = Tuple[int, int, int]


def point_distances(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Euclidean distance from ``query`` to each row of ``points``."""
    diff = points - query
    return np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2)


class UniformGrid:
    """
    Points bucketed into cubic cells of side ``cell_size``.

    ``nearest`` scans cells in growing Chebyshev rings around the query's
    cell and stops once the best distance found cannot be beaten by any
    unscanned ring. Candidate distances go through ``point_distances``, so
    the result matches a brute-force scan bit for bit.
    """

    def __init__(self, points: np.ndarray, cell_size: float):
        points = np.asarray(points, dtype=np.float64)
        if len(points) == 0:
            raise EmptyMesh("Cannot build a grid over zero points")
        self.points = points
        self.cell_size = float(cell_size) if cell_size > 0 else 1.0
        self.origin = points.min(axis=0)
        keys = self._cell_of(points)
        self.lower = keys.min(axis=0)
        self.upper = keys.max(axis=0)
        buckets: Dict[Cell, list] = {}
        for index, key in enumerate(map(tuple, keys)):
            buckets.setdefault(key, []).append(index)
        self.cells: Dict[Cell, np.ndarray] = {
            key: np.asarray(members, dtype=np.int64) for key, members in buckets.items()
        }
        self._rings: Dict[int, np.ndarray] = {}

    def _cell_of(self, points: np.ndarray) -> np.ndarray:
        return np.floor((points - self.origin) / self.cell_size).astype(np.int64)

    def _ring(self, radius: int) -> np.ndarray:
        if radius not in self._rings:
            span = np.arange(-radius, radius + 1)
            offsets = np.stack(np.meshgrid(span, span, span, indexing="ij"), -1).reshape(-1, 3)
            self._rings[radius] = offsets[np.abs(offsets).max(axis=1) == radius]
        return self._rings[radius]

    def nearest(self, query: np.ndarray) -> Tuple[float, int]:
        """Distance to and index of the nearest point (lowest index on ties)."""
        query = np.asarray(query, dtype=np.float64)
        home = self._cell_of(query[None, :])[0]
        last_ring = int(
            np.max(np.maximum(np.abs(home - self.lower), np.abs(self.upper - home)))
        )
        best, best_index = np.inf, -1
        radius = 0
        while radius <= last_ring:
            for offset in self._ring(radius):
                members = self.cells.get(tuple(int(c) for c in home + offset))
                if members is None:
                    continue
                distances = point_distances(self.points[members], query)
                slot = int(np.argmin(distances))
                value = distances[slot]
                if value < best or (value == best and members[slot] < best_index):
                    best, best_index = float(value), int(members[slot])
            # unscanned cells are at least ``radius`` whole cells away
            if best < radius * self.cell_size:
                break
            radius += 1
        return best, best_index
