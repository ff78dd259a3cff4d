"""
Tests for patch normalization and its inverse
"""

import numpy as np
import pytest

from src.descriptor.lsd import build_patch_lsd, compute_face_descriptors
from src.descriptor.normalization import (
    TARGET_NORMAL,
    NormalizationContext,
    denormalize,
    normalize_patch,
    patch_mean_normal,
    rodrigues_rotation,
)
from src.mesh.mesh import Mesh
from src.mesh.patching import Patch, generate_patches
from src.mesh.primitives import icosahedron, icosphere
from src.utils.error_handling import ContractViolation, DegenerateAverageNormal


def _random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def _sphere_patch(mesh, index=2, size=30):
    patch = generate_patches(mesh, size)[index]
    table = compute_face_descriptors(mesh, 2, 3, faces=patch.faces)
    return patch, build_patch_lsd(mesh, patch, table.d_a, 2, 3, table=table)


class TestRodrigues:
    @pytest.mark.parametrize("seed", range(5))
    def test_maps_source_to_target(self, seed):
        """Test R s = t with R a proper rotation"""
        rng = np.random.default_rng(seed)
        s, t = rng.normal(size=3), rng.normal(size=3)
        s, t = s / np.linalg.norm(s), t / np.linalg.norm(t)
        rotation = rodrigues_rotation(s, t)
        assert np.allclose(rotation @ s, t)
        assert np.allclose(rotation @ rotation.T, np.eye(3))
        assert np.linalg.det(rotation) == pytest.approx(1.0)

    def test_parallel_is_identity(self):
        """Test no rotation for an aligned source"""
        assert np.array_equal(rodrigues_rotation(TARGET_NORMAL, TARGET_NORMAL), np.eye(3))

    def test_antiparallel_half_turn(self):
        """Test the opposite direction still maps onto the target"""
        rotation = rodrigues_rotation(-TARGET_NORMAL, TARGET_NORMAL)
        assert np.allclose(rotation @ -TARGET_NORMAL, TARGET_NORMAL)
        assert np.linalg.det(rotation) == pytest.approx(1.0)
        assert np.allclose(rotation @ rotation.T, np.eye(3))


class TestNormalizePatch:
    def test_mean_normal_on_target(self):
        """Test the rotated mean normal is the +x axis"""
        mesh = icosphere(2)
        patch, lsd = _sphere_patch(mesh)
        _, ctx = normalize_patch(lsd, patch, mesh)
        mean = ctx.rotate(mesh.face_normals[list(patch.faces)]).mean(axis=0)
        assert np.allclose(mean / np.linalg.norm(mean), TARGET_NORMAL)

    def test_unit_cube_bounds(self):
        """Test coordinates land in [-1, 1] with the center pole at the origin"""
        mesh = icosphere(2)
        patch, lsd = _sphere_patch(mesh)
        normalized, ctx = normalize_patch(lsd, patch, mesh)
        points = np.concatenate(
            [normalized.spatial[:, 0:3], normalized.spatial[:, 6:15].reshape(-1, 3)]
        )
        assert np.abs(points).max() == pytest.approx(1.0)
        assert np.allclose(normalized.spatial[0, 0:3], 0.0)
        assert ctx.M_v > 0
        assert np.allclose(np.linalg.norm(normalized.grids, axis=-1), 1.0)
        assert np.allclose(np.linalg.norm(normalized.spatial[:, 3:6], axis=-1), 1.0)

    def test_inverse_recovers_world_values(self):
        """Test denormalize undoes normalize_patch"""
        mesh = icosphere(2)
        patch, lsd = _sphere_patch(mesh, index=4)
        normalized, ctx = normalize_patch(lsd, patch, mesh)
        local_normals = ctx.rotate(mesh.face_normals[list(patch.faces)])
        normals, vertices = denormalize(local_normals, normalized.spatial[:, 6:15], ctx)
        assert np.abs(normals - mesh.face_normals[list(patch.faces)]).max() < 1e-12
        assert np.abs(vertices - lsd.spatial[:, 6:15]).max() < 1e-12
        assert vertices.shape == (patch.size, 9)

    def test_antiparallel_patch(self):
        """Test a patch whose mean normal is -x"""
        mesh = Mesh([(0, 0, 0), (0, 0, 1), (0, 1, 0)], [(0, 1, 2)])
        assert np.allclose(mesh.face_normals[0], [-1, 0, 0])
        patch = Patch(center_face=0, faces=(0,), mesh_ref=mesh.name)
        lsd = build_patch_lsd(mesh, patch, 1.0, 2, 2)
        normalized, ctx = normalize_patch(lsd, patch, mesh)
        assert np.allclose(ctx.rotate(mesh.face_normals[0]), TARGET_NORMAL)
        assert np.allclose(normalized.grids[0, 1, 1], TARGET_NORMAL)

    def test_cancelling_normals(self):
        """Test a patch whose normals average to zero"""
        mesh = Mesh([(0, 0, 0), (1, 0, 0), (0, 1, 0)], [(0, 1, 2), (0, 2, 1)])
        patch = Patch(center_face=0, faces=(0, 1), mesh_ref=mesh.name)
        with pytest.raises(DegenerateAverageNormal):
            patch_mean_normal(mesh, patch)

    def test_size_mismatch(self):
        """Test a descriptor built for another patch"""
        mesh = icosphere(1)
        patch, lsd = _sphere_patch(mesh, index=0, size=10)
        other = Patch(center_face=patch.center_face, faces=patch.faces[:5], mesh_ref=mesh.name)
        with pytest.raises(ContractViolation):
            normalize_patch(lsd, other, mesh)


INVARIANCE_TOLERANCE = 1e-6


def _normalized(mesh, patch, d_a=None):
    table = compute_face_descriptors(mesh, 2, 3, d_a=d_a, faces=patch.faces)
    lsd = build_patch_lsd(mesh, patch, table.d_a, 2, 3, table)
    normalized, ctx = normalize_patch(lsd, patch, mesh)
    return normalized, ctx, lsd, table.d_a


@pytest.fixture(scope="module")
def reference():
    mesh = icosphere(2)
    patch = generate_patches(mesh, 20)[3]
    return (mesh, patch) + _normalized(mesh, patch)


class TestInvariance:
    @pytest.mark.parametrize("seed", range(50))
    def test_rigid_motion(self, reference, seed):
        """Test a moved mesh normalizes the same up to a turn about the target axis"""
        mesh, patch, first, ctx1, lsd1, d_a = reference
        rng = np.random.default_rng(seed)
        rotation = _random_rotation(rng)
        shift = rng.normal(scale=5.0, size=3)
        moved = Mesh(mesh.vertices @ rotation.T + shift, mesh.faces)
        second, ctx2, lsd2, _ = _normalized(moved, patch, d_a)

        twist = ctx2.rotation @ rotation @ ctx1.rotation.T
        assert np.allclose(twist @ TARGET_NORMAL, TARGET_NORMAL, atol=1e-9)
        assert np.allclose(twist @ twist.T, np.eye(3), atol=1e-9)
        assert np.array_equal(lsd1.valid, lsd2.valid)

        scale = ctx1.M_v / ctx2.M_v
        assert np.abs(second.grids - first.grids @ twist.T).max() < INVARIANCE_TOLERANCE
        assert (
            np.abs(second.spatial[:, 3:6] - first.spatial[:, 3:6] @ twist.T).max()
            < INVARIANCE_TOLERANCE
        )
        for columns in (slice(0, 3), slice(6, 15)):
            before = first.spatial[:, columns].reshape(-1, 3)
            after = second.spatial[:, columns].reshape(-1, 3)
            assert np.abs(after - before @ twist.T * scale).max() < INVARIANCE_TOLERANCE

    @pytest.mark.parametrize("seed", range(10))
    def test_uniform_scale(self, reference, seed):
        """Test a uniformly scaled mesh gives the same normalized descriptor"""
        mesh, patch, first, ctx1, lsd1, _ = reference
        factor = float(np.random.default_rng(seed).uniform(0.1, 10.0))
        scaled = Mesh(mesh.vertices * factor, mesh.faces)
        second, ctx2, lsd2, _ = _normalized(scaled, patch)

        assert ctx2.M_v == pytest.approx(ctx1.M_v * factor, rel=1e-9)
        assert np.array_equal(lsd1.valid, lsd2.valid)
        assert np.abs(second.grids - first.grids).max() < INVARIANCE_TOLERANCE
        assert np.abs(second.spatial - first.spatial).max() < INVARIANCE_TOLERANCE


class TestCenterFallback:
    def test_closed_mesh_in_one_patch(self):
        """Test a patch covering a whole closed mesh uses the center face normal"""
        mesh = icosahedron()
        patch = generate_patches(mesh, 240)[0]
        assert patch.size == mesh.n_faces
        with pytest.raises(DegenerateAverageNormal):
            patch_mean_normal(mesh, patch)

        mean = patch_mean_normal(mesh, patch, center_fallback=True)
        assert np.allclose(mean, mesh.face_normals[patch.center_face])
        lsd = build_patch_lsd(mesh, patch, 1.0, 2, 2)
        _, ctx = normalize_patch(lsd, patch, mesh, center_fallback=True)
        assert np.allclose(
            ctx.rotate(mesh.face_normals[patch.center_face]), TARGET_NORMAL
        )

    def test_fallback_needs_a_center_normal(self):
        """Test a degenerate center face still raises"""
        mesh = Mesh(
            [(0, 0, 0), (1, 0, 0), (0, 1, 0), (2, 0, 0)],
            [(0, 1, 3), (0, 1, 2), (0, 2, 1)],
        )
        patch = Patch(center_face=0, faces=(0, 1, 2), mesh_ref=mesh.name)
        with pytest.raises(DegenerateAverageNormal):
            patch_mean_normal(mesh, patch, center_fallback=True)


def test_identity_context():
    """Test the identity context leaves points unchanged"""
    ctx = NormalizationContext.identity()
    points = np.arange(12.0).reshape(4, 3)
    assert np.array_equal(ctx.to_local(points), points)
    assert np.array_equal(ctx.to_world(points), points)
