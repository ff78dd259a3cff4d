"""
Tests for normal-guided vertex refinement
"""

import numpy as np
import pytest

from src.mesh.primitives import icosphere, planar_grid, unit_cube
from src.pipeline.metrics import metric_ea
from src.pipeline.refine import vertex_refine
from src.training.noise import add_gaussian_noise
from src.utils.error_handling import ShapeMismatch


def test_single_face_example():
    """Test one sweep on a face with a raised corner"""
    vertices = np.array([[0.0, 0.0, 0.3], [3.0, 0.0, 0.0], [0.0, 3.0, 0.0]])
    faces = np.array([[0, 1, 2]])
    refined = vertex_refine(vertices, faces, np.array([[0.0, 0.0, 1.0]]), iterations=1)

    # every corner moves to the center height
    assert refined[:, 2] == pytest.approx([0.1, 0.1, 0.1])
    assert np.array_equal(refined[:, :2], vertices[:, :2])


def test_planar_fixed_point():
    """Test exact plane normals leave a flat grid untouched"""
    mesh = planar_grid(5, 4, spacing=0.5)
    refined = vertex_refine(mesh.vertices, mesh.faces, mesh.face_normals, iterations=10)
    assert np.array_equal(refined, mesh.vertices)


def test_cube_fixed_point():
    """Test each sweep moves clean cube vertices by less than 1e-9"""
    cube = unit_cube()
    moves = []
    previous = [cube.vertices]

    def track(sweep, positions):
        moves.append(np.abs(positions - previous[0]).max())
        previous[0] = positions

    vertex_refine(cube.vertices, cube.faces, cube.face_normals, iterations=5, callback=track)
    assert len(moves) == 5
    assert max(moves) < 1e-9


def test_zero_iterations():
    """Test N_v = 0 returns the input positions"""
    mesh = icosphere(1)
    refined = vertex_refine(mesh.vertices, mesh.faces, mesh.face_normals, iterations=0)
    assert np.array_equal(refined, mesh.vertices)
    assert refined is not mesh.vertices


def test_callback_sweep_numbers():
    """Test the callback sees every sweep in order"""
    mesh = icosphere(1)
    seen = []
    vertex_refine(
        mesh.vertices, mesh.faces, mesh.face_normals, 3, lambda sweep, _: seen.append(sweep)
    )
    assert seen == [1, 2, 3]


def test_clean_normals_reduce_the_angle_error():
    """Test refining noisy positions toward clean normals"""
    clean = icosphere(2)
    noisy = add_gaussian_noise(clean, 0.1, seed=0)
    refined = vertex_refine(noisy.vertices, noisy.faces, clean.face_normals, iterations=20)
    assert metric_ea(noisy.with_vertices(refined), clean) < metric_ea(noisy, clean)


def test_unreferenced_vertex_stays_put():
    """Test a vertex on no face"""
    vertices = np.array([[0.0, 0.0, 0.3], [3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [5.0, 5.0, 5.0]])
    refined = vertex_refine(
        vertices, np.array([[0, 1, 2]]), np.array([[0.0, 0.0, 1.0]]), iterations=4
    )
    assert np.array_equal(refined[3], vertices[3])


def test_jacobi_update_is_order_independent():
    """Test relabelling the faces gives the same positions"""
    clean = icosphere(1)
    noisy = add_gaussian_noise(clean, 0.2, seed=2)
    order = np.random.default_rng(0).permutation(clean.n_faces)
    first = vertex_refine(noisy.vertices, noisy.faces, clean.face_normals, iterations=3)
    second = vertex_refine(
        noisy.vertices, noisy.faces[order], clean.face_normals[order], iterations=3
    )
    assert np.allclose(first, second, atol=1e-14)


def test_normal_count_mismatch():
    """Test fewer normals than faces"""
    mesh = unit_cube()
    with pytest.raises(ShapeMismatch):
        vertex_refine(mesh.vertices, mesh.faces, mesh.face_normals[:-1], iterations=1)
