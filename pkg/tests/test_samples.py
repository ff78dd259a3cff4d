"""
Tests for training sample construction, manifests and augmentation
"""

from pathlib import Path

import numpy as np
import pytest

from src.descriptor.lsd import build_patch_lsd
from src.descriptor.normalization import normalize_patch
from src.mesh.io import save_mesh
from src.mesh.patching import Patch, grow_patch
from src.mesh.primitives import icosphere, unit_cube
from src.model.config import ModelConfig
from src.training.noise import add_gaussian_noise
from src.training.samples import (
    ConcatSampleSet,
    PatchSampleSet,
    augment,
    build_sample,
    build_samples,
    load_manifest,
    load_training_set,
    random_rotation,
)
from src.utils.error_handling import EmptyDataset, ParseError, TopologyMismatch

CONFIG = ModelConfig.build(D=16, L=1, N_h=2, T_s=2, p_s=2, T_f=10, knn_k=3)


@pytest.fixture(scope="module")
def sphere_pair():
    clean = icosphere(1)
    return add_gaussian_noise(clean, 0.2, seed=3), clean


@pytest.fixture(scope="module")
def samples(sphere_pair):
    noisy, clean = sphere_pair
    return build_samples(noisy, clean, CONFIG)


class TestBuildSamples:
    def test_one_sample_per_face(self, samples, sphere_pair):
        """Test the sample count and patch centers"""
        noisy, _ = sphere_pair
        assert len(samples) == noisy.n_faces
        assert samples[5].center_face == 5
        assert samples[5].size == CONFIG.T_f

    def test_sample_shapes(self, samples):
        """Test the arrays of one sample"""
        sample = samples[0]
        assert sample.grids.shape == (10, 4, 4, 3)
        assert sample.spatial.shape == (10, 15)
        assert sample.gt_normals.shape == (10, 3)
        assert sample.gt_offsets.shape == (10, 9)
        assert sample.mask.all()
        assert np.allclose(np.linalg.norm(sample.gt_normals, axis=1), 1.0, atol=1e-6)

    def test_clean_input_has_zero_offsets(self):
        """Test a mesh paired with itself"""
        mesh = icosphere(1)
        sample = build_samples(mesh, mesh, CONFIG)[7]
        assert np.abs(sample.gt_offsets).max() < 1e-12

    def test_offsets_reach_the_clean_vertices(self, samples, sphere_pair):
        """Test noisy vertices plus offsets are the clean vertices in the patch frame"""
        noisy, clean = sphere_pair
        faces = grow_patch(noisy, 11, CONFIG.T_f)
        patch = Patch(center_face=11, faces=faces, mesh_ref=noisy.name)
        table = samples.table
        lsd = build_patch_lsd(noisy, patch, table.d_a, table.p_s, table.T_s, table)
        _, ctx = normalize_patch(lsd, patch, noisy)
        sample = samples[11]
        target = sample.spatial[:, 6:15] + sample.gt_offsets
        world = ctx.to_world(target.reshape(-1, 3)).reshape(-1, 3, 3)
        assert np.allclose(world, clean.face_corners[list(faces)], atol=1e-12)
        assert np.allclose(ctx.unrotate(sample.gt_normals), clean.face_normals[list(faces)])

    def test_cube_normals_round_trip(self):
        """Test the clean cube's normals come back as the six axis directions"""
        cube = unit_cube()
        config = ModelConfig.build(D=16, L=1, N_h=2, T_s=2, p_s=2, T_f=4, knn_k=3)
        sample_set = PatchSampleSet(cube, cube, config)
        recovered = set()
        for face in range(cube.n_faces):
            patch = Patch(face, grow_patch(cube, face, 4), cube.name)
            table = sample_set.table
            sample = build_sample(cube, cube, patch, table)
            lsd = build_patch_lsd(cube, patch, table.d_a, table.p_s, table.T_s, table)
            _, ctx = normalize_patch(lsd, patch, cube)
            for normal in np.round(ctx.unrotate(sample.gt_normals), 9):
                recovered.add(tuple(normal + 0.0))
        assert recovered == {
            (1.0, 0.0, 0.0),
            (-1.0, 0.0, 0.0),
            (0.0, 1.0, 0.0),
            (0.0, -1.0, 0.0),
            (0.0, 0.0, 1.0),
            (0.0, 0.0, -1.0),
        }

    def test_whole_cube_in_one_patch(self):
        """Test the default patch size, where every patch covers the closed cube"""
        cube = unit_cube()
        config = ModelConfig.build(D=16, L=1, N_h=2, T_s=2, p_s=2, T_f=240, knn_k=3)
        samples = build_samples(cube, cube, config)
        assert len(samples) == cube.n_faces
        for face in range(cube.n_faces):
            sample = samples[face]
            assert sample.center_face == face
            assert sample.size == cube.n_faces
            assert np.allclose(sample.gt_normals[0], [1.0, 0.0, 0.0])
            assert np.abs(sample.gt_offsets).max() < 1e-12
            axes = {tuple(row + 0.0) for row in np.round(sample.gt_normals, 9)}
            assert len(axes) == 6

    def test_topology_mismatch(self):
        """Test pairing meshes with different indexing"""
        with pytest.raises(TopologyMismatch):
            build_samples(icosphere(1), icosphere(2), CONFIG)

    def test_sequence_access(self, samples):
        """Test negative indices, slices and range checks"""
        assert samples[-1].center_face == len(samples) - 1
        assert [s.center_face for s in samples[2:5]] == [2, 3, 4]
        with pytest.raises(IndexError):
            samples[len(samples)]


class TestConcatSampleSet:
    def test_indexing_across_parts(self):
        """Test global indices map onto the right part"""
        joined = ConcatSampleSet([["a", "b"], [], ["c"], ["d", "e"]])
        assert len(joined) == 5
        assert [joined[i] for i in range(5)] == ["a", "b", "c", "d", "e"]
        assert joined[-1] == "e"
        assert joined[1:4] == ["b", "c", "d"]
        assert list(joined) == ["a", "b", "c", "d", "e"]
        with pytest.raises(IndexError):
            joined[5]

    def test_empty(self):
        """Test a set without parts"""
        assert len(ConcatSampleSet([])) == 0


class TestManifest:
    def test_relative_paths_and_comments(self, tmp_path):
        """Test parsing a manifest"""
        manifest = tmp_path / "data" / "train.txt"
        manifest.parent.mkdir()
        manifest.write_text("# pairs\n\nnoisy.obj clean.obj  # first\n/abs/n.off /abs/c.off\n")
        pairs = load_manifest(manifest)
        assert pairs == [
            (manifest.parent / "noisy.obj", manifest.parent / "clean.obj"),
            (Path("/abs/n.off"), Path("/abs/c.off")),
        ]

    def test_malformed_line(self, tmp_path):
        """Test a line with three fields"""
        manifest = tmp_path / "train.txt"
        manifest.write_text("a.obj b.obj c.obj\n")
        with pytest.raises(ParseError):
            load_manifest(manifest)

    def test_empty_manifest(self, tmp_path):
        """Test a manifest with only comments"""
        manifest = tmp_path / "train.txt"
        manifest.write_text("# nothing yet\n")
        with pytest.raises(EmptyDataset):
            load_training_set(manifest, CONFIG)

    def test_load_training_set(self, tmp_path, sphere_pair):
        """Test loading two pairs from disk"""
        noisy, clean = sphere_pair
        save_mesh(noisy, tmp_path / "noisy.obj")
        save_mesh(clean, tmp_path / "clean.obj")
        manifest = tmp_path / "train.txt"
        manifest.write_text("noisy.obj clean.obj\nclean.obj clean.obj\n")
        training_set = load_training_set(manifest, CONFIG)
        assert len(training_set) == 2 * clean.n_faces
        assert np.abs(training_set[clean.n_faces + 3].gt_offsets).max() < 1e-12


class TestAugment:
    def test_identity_without_jitter(self, samples):
        """Test Q = I with zero jitter changes nothing"""
        sample = samples[4]
        same = augment(sample, seed=0, rotation=np.eye(3), jitter_std=0.0)
        for field in ("grids", "spatial", "gt_normals", "gt_offsets"):
            assert np.array_equal(getattr(same, field), getattr(sample, field))

    def test_rotation_is_coherent(self, samples):
        """Test every quantity turns by the same rotation"""
        sample = samples[9]
        q = random_rotation(np.random.default_rng(1))
        turned = augment(sample, seed=0, rotation=q, jitter_std=0.0)
        assert np.allclose(turned.grids, sample.grids @ q.T)
        assert np.allclose(turned.spatial[:, 3:6], sample.spatial[:, 3:6] @ q.T)
        assert np.allclose(turned.spatial[:, 0:3], sample.spatial[:, 0:3] @ q.T)
        assert np.allclose(np.linalg.norm(turned.gt_normals, axis=1), 1.0)

        # residual lengths do not depend on the rotation
        guess = np.tile([1.0, 0.0, 0.0], (sample.size, 1))
        before = np.linalg.norm(guess - sample.gt_normals, axis=1)
        after = np.linalg.norm(guess @ q.T - turned.gt_normals, axis=1)
        assert np.abs(before - after).max() < 1e-9

    def test_jitter_touches_positions_only(self, samples):
        """Test jitter leaves directions and targets alone"""
        sample = samples[2]
        jittered = augment(sample, seed=[1, 2, 3], rotation=np.eye(3), jitter_std=0.01)
        assert np.array_equal(jittered.spatial[:, 3:6], sample.spatial[:, 3:6])
        assert np.array_equal(jittered.grids, sample.grids)
        assert np.array_equal(jittered.gt_offsets, sample.gt_offsets)
        assert not np.array_equal(jittered.spatial[:, 0:3], sample.spatial[:, 0:3])
        assert np.abs(jittered.spatial - sample.spatial).max() < 0.1

    def test_seeded(self, samples):
        """Test one seed gives one augmentation"""
        sample = samples[0]
        assert np.array_equal(augment(sample, [0, 1]).spatial, augment(sample, [0, 1]).spatial)
        assert not np.array_equal(augment(sample, [0, 1]).spatial, augment(sample, [0, 2]).spatial)

    def test_random_rotation_is_proper(self):
        """Test the sampled matrix is a rotation"""
        q = random_rotation(np.random.default_rng(5))
        assert np.allclose(q @ q.T, np.eye(3))
        assert np.linalg.det(q) == pytest.approx(1.0)
