"""
Tests for the evaluation metrics
"""

import numpy as np
import pytest

from src.mesh.mesh import Mesh
from src.mesh.primitives import icosphere, planar_grid, unit_cube
from src.pipeline.metrics import metric_ea, metric_ev, normal_angle_error
from src.training.noise import add_gaussian_noise
from src.utils.error_handling import ContractViolation, EmptyMesh, TopologyMismatch

CORPUS = [unit_cube(), icosphere(2), planar_grid(6, 3)]


class TestMetricEa:
    @pytest.mark.parametrize("mesh", CORPUS, ids=lambda m: m.name)
    def test_identical_meshes(self, mesh):
        """Test E_a(m, m) = 0"""
        assert metric_ea(mesh, mesh) == 0.0

    def test_right_angle(self):
        """Test normals (0,0,1) against (0,1,0)"""
        up = Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
        side = Mesh([[0, 0, 0], [0, 0, 1], [1, 0, 0]], [[0, 1, 2]])
        assert side.face_normals[0] == pytest.approx([0.0, 1.0, 0.0])
        assert metric_ea(up, side) == pytest.approx(90.0)

    def test_antiparallel(self):
        """Test flipped winding gives 180 without NaN"""
        up = Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
        down = Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 2, 1]])
        assert metric_ea(up, down) == pytest.approx(180.0)

    def test_dot_products_past_one_are_clamped(self):
        """Test rounding just outside [-1, 1]"""
        normals = np.array([[1.0 + 1e-12, 0.0, 0.0], [-1.0 - 1e-12, 0.0, 0.0]])
        reference = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        errors = normal_angle_error(normals, reference)
        assert not np.isnan(errors).any()
        assert errors == pytest.approx([0.0, 180.0])

    def test_zero_normal_against_a_real_one(self):
        """Test a zero row scores 90 against a unit normal, 0 against a zero row"""
        errors = normal_angle_error(
            np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
            np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]),
        )
        assert errors == pytest.approx([90.0, 0.0])

    def test_collapsed_face(self):
        """Test a denoised face squashed onto a line"""
        collapsed = Mesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
        clean = Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
        assert metric_ea(collapsed, clean) == pytest.approx(90.0)

    def test_noise_raises_the_error(self):
        """Test a noisy copy scores worse than the clean mesh"""
        mesh = icosphere(2)
        assert metric_ea(add_gaussian_noise(mesh, 0.2, seed=0), mesh) > 1.0

    def test_topology_mismatch(self):
        """Test meshes with different face counts"""
        with pytest.raises(TopologyMismatch):
            metric_ea(icosphere(1), icosphere(2))

    def test_no_faces(self):
        """Test comparing face-less meshes"""
        empty = Mesh([[0, 0, 0]], [])
        with pytest.raises(EmptyMesh):
            metric_ea(empty, empty)


class TestMetricEv:
    @pytest.mark.parametrize("mesh", CORPUS, ids=lambda m: m.name)
    def test_identical_meshes(self, mesh):
        """Test E_v(m, m) = 0"""
        assert metric_ev(mesh, mesh) == 0.0

    def test_direct_formula(self):
        """Test two vertices at distance 1 and 2 from a single target"""
        gt = Mesh([[0.0, 0.0, 0.0]], [])
        denoised = Mesh([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]], [])
        assert metric_ev(denoised, gt, edge_length=1.0) == pytest.approx(1.5)
        assert metric_ev(denoised, gt, edge_length=1.0, brute_force=True) == pytest.approx(1.5)

    def test_normalized_by_edge_length(self):
        """Test scaling both meshes leaves E_v unchanged"""
        clean = icosphere(2)
        noisy = add_gaussian_noise(clean, 0.3, seed=1)
        scaled_clean = clean.with_vertices(clean.vertices * 4.0)
        scaled_noisy = noisy.with_vertices(noisy.vertices * 4.0)
        assert metric_ev(scaled_noisy, scaled_clean) == pytest.approx(metric_ev(noisy, clean))

    def test_grid_matches_brute_force(self):
        """Test the grid search on 1000 random vertices"""
        rng = np.random.default_rng(0)
        gt = Mesh(rng.uniform(-1, 1, (1000, 3)), [])
        denoised = Mesh(rng.uniform(-1.2, 1.2, (1000, 3)), [])
        for scale in (0.1, 0.5):
            grid = metric_ev(denoised, gt, edge_length=scale)
            brute = metric_ev(denoised, gt, edge_length=scale, brute_force=True)
            assert grid == brute

    def test_empty_mesh(self):
        """Test a reference without vertices"""
        with pytest.raises(EmptyMesh):
            metric_ev(unit_cube(), Mesh([], []), edge_length=1.0)

    def test_non_positive_edge_length(self):
        """Test a zero normalizer"""
        with pytest.raises(ContractViolation):
            metric_ev(unit_cube(), unit_cube(), edge_length=0.0)
