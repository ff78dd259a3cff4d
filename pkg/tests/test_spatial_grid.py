"""
Tests for the uniform-grid nearest-neighbour search
"""

import numpy as np
import pytest

from src.pipeline.spatial_grid import UniformGrid, point_distances
from src.utils.error_handling import EmptyMesh


@pytest.mark.parametrize("cell_size", [0.05, 0.3, 2.0])
def test_matches_brute_force(cell_size):
    """Test distances and indices against a full scan"""
    rng = np.random.default_rng(3)
    points = rng.uniform(-1, 1, (500, 3))
    grid = UniformGrid(points, cell_size)
    for query in rng.uniform(-1.5, 1.5, (100, 3)):
        distances = point_distances(points, query)
        assert grid.nearest(query) == (distances.min(), int(np.argmin(distances)))


def test_exact_hit():
    """Test a query on a stored point"""
    points = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 0.0, 0.0]])
    assert UniformGrid(points, 0.5).nearest(points[1]) == (0.0, 1)


def test_ties_take_the_lowest_index():
    """Test equidistant points in different cells and duplicates"""
    points = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    assert UniformGrid(points, 0.25).nearest(np.zeros(3)) == (1.0, 0)

    flipped = points[[1, 0, 2]]
    assert UniformGrid(flipped, 0.25).nearest(np.zeros(3)) == (1.0, 0)


def test_far_query():
    """Test a query well outside the bounding box"""
    points = np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]])
    distance, index = UniformGrid(points, 0.1).nearest(np.array([3.0, 0.0, 0.0]))
    assert index == 1
    assert distance == pytest.approx(2.5)


def test_non_positive_cell_size_falls_back():
    """Test a zero cell size"""
    grid = UniformGrid(np.array([[0.0, 0.0, 0.0]]), 0.0)
    assert grid.cell_size == 1.0
    assert grid.nearest(np.array([0.0, 3.0, 4.0])) == (5.0, 0)


def test_empty():
    """Test a grid over no points"""
    with pytest.raises(EmptyMesh):
        UniformGrid(np.zeros((0, 3)), 1.0)


def test_point_distances():
    """Test the row-wise distance helper"""
    points = np.array([[3.0, 4.0, 0.0], [0.0, 0.0, 2.0]])
    assert point_distances(points, np.zeros(3)).tolist() == [5.0, 2.0]
