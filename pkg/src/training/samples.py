"""
Training samples: one normalized patch per face of a noisy mesh, paired with
the clean mesh's normals and vertices in the same normalized frame.
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union, overload

import numpy as np

from src.descriptor.lsd import FaceDescriptorTable, build_patch_lsd, compute_face_descriptors
from src.descriptor.normalization import normalize_patch
from src.mesh.io import load_mesh
from src.mesh.mesh import Mesh, average_adjacent_center_distance
from src.mesh.patching import Patch, grow_patch
from src.model.config import ModelConfig
from src.utils.config import DEFAULT_JITTER_STD
from src.utils.error_handling import (
    EmptyDataset,
    FileOperationError,
    ParseError,
    TopologyMismatch,
    validate_file_exists,
)

logger = logging.getLogger(__name__)

SeedLike = Union[int, Sequence[int]]


@dataclass(frozen=True)
class TrainingSample:
    """
    Normalized descriptor of one noisy patch and its supervision targets.

    Attributes:
        grids: (n, side, side, 3) normal grids
        spatial: (n, 15) spatial rows
        mask: (n,) token mask
        gt_normals: (n, 3) clean normals, rotated into the patch frame
        gt_offsets: (n, 9) clean minus noisy vertex triples, normalized
        center_face: Face the patch was grown around
    """

    grids: np.ndarray
    spatial: np.ndarray
    mask: np.ndarray
    gt_normals: np.ndarray
    gt_offsets: np.ndarray
    center_face: int = -1

    @property
    def size(self) -> int:
        return len(self.spatial)


def check_topology(noisy: Mesh, clean: Mesh) -> None:
    """
    Raises:
        TopologyMismatch: If the meshes do not share vertex and face indexing
    """
    if noisy.n_vertices != clean.n_vertices or not np.array_equal(
        noisy.faces, clean.faces
    ):
        raise TopologyMismatch(
            f"{noisy.name} and {clean.name} do not share indexing",
            {
                "vertices": [noisy.n_vertices, clean.n_vertices],
                "faces": [noisy.n_faces, clean.n_faces],
            },
        )


def build_sample(
    noisy: Mesh, clean: Mesh, patch: Patch, table: FaceDescriptorTable
) -> TrainingSample:
    """Normalize the patch's noisy descriptor and carry the clean targets along."""
    lsd = build_patch_lsd(noisy, patch, table.d_a, table.p_s, table.T_s, table)
    normalized, ctx = normalize_patch(lsd, patch, noisy, center_fallback=True)
    faces = list(patch.faces)
    n = len(faces)
    clean_corners = ctx.to_local(clean.face_corners[faces]).reshape(n, 9)
    return TrainingSample(
        grids=normalized.grids,
        spatial=normalized.spatial,
        mask=np.ones(n, dtype=bool),
        gt_normals=ctx.rotate(clean.face_normals[faces]),
        gt_offsets=clean_corners - normalized.spatial[:, 6:15],
        center_face=patch.center_face,
    )


class PatchSampleSet(Sequence[TrainingSample]):
    """
    One training sample per face of ``noisy``, built on access.

    The per-face descriptor table is computed once up front; patch growth and
    normalization happen in ``__getitem__`` so the full set is never held in
    memory.
    """

    def __init__(
        self,
        noisy: Mesh,
        clean: Mesh,
        config: ModelConfig,
        workers: int = 1,
        table: Optional[FaceDescriptorTable] = None,
    ):
        check_topology(noisy, clean)
        self.noisy = noisy
        self.clean = clean
        self.patch_faces = config.T_f
        if table is None:
            table = compute_face_descriptors(
                noisy,
                config.p_s,
                config.T_s,
                d_a=average_adjacent_center_distance(noisy),
                workers=workers,
            )
        self.table = table

    def __len__(self) -> int:
        return self.noisy.n_faces

    @overload
    def __getitem__(self, index: int) -> TrainingSample: ...

    @overload
    def __getitem__(self, index: slice) -> List[TrainingSample]: ...

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        if index < 0:
            index += len(self)
        if not 0 <= index < len(self):
            raise IndexError(f"Sample {index} out of range")
        faces = grow_patch(self.noisy, index, self.patch_faces)
        patch = Patch(center_face=index, faces=faces, mesh_ref=self.noisy.name)
        return build_sample(self.noisy, self.clean, patch, self.table)


class ConcatSampleSet(Sequence[TrainingSample]):
    """Several sample sets indexed as one."""

    def __init__(self, parts: Sequence[Sequence[TrainingSample]]):
        self.parts = list(parts)
        self._ends = np.cumsum([len(part) for part in self.parts], dtype=np.int64)

    def __len__(self) -> int:
        return int(self._ends[-1]) if len(self._ends) else 0

    def __getitem__(self, index):  # type: ignore[override]
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        if index < 0:
            index += len(self)
        if not 0 <= index < len(self):
            raise IndexError(f"Sample {index} out of range")
        part = int(np.searchsorted(self._ends, index, side="right"))
        start = int(self._ends[part - 1]) if part else 0
        return self.parts[part][index - start]

    def __iter__(self) -> Iterator[TrainingSample]:
        for part in self.parts:
            yield from part


def build_samples(
    noisy: Mesh, clean: Mesh, config: ModelConfig, workers: int = 1
) -> PatchSampleSet:
    """
    Build the training samples of one (noisy, clean) pair.

    Raises:
        TopologyMismatch: If the meshes do not share indexing
    """
    samples = PatchSampleSet(noisy, clean, config, workers=workers)
    logger.info("Prepared %d training samples from %s", len(samples), noisy.name)
    return samples


def load_manifest(path: Union[str, Path]) -> List[Tuple[Path, Path]]:
    """
    Read ``noisy clean`` path pairs, one per line.

    Blank lines and ``#`` comments are skipped; relative paths are resolved
    against the manifest's directory.

    Raises:
        FileOperationError: If the manifest cannot be read
        ParseError: If a line does not hold exactly two paths
    """
    path = Path(path)
    validate_file_exists(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise FileOperationError(f"Failed to read manifest: {path}", {"error": str(e)})

    pairs: List[Tuple[Path, Path]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise ParseError(
                f"{path}:{line_no}: expected 'noisy clean', got {len(tokens)} fields",
                {"line": raw},
            )
        noisy, clean = (Path(token) for token in tokens)
        pairs.append(
            (
                noisy if noisy.is_absolute() else path.parent / noisy,
                clean if clean.is_absolute() else path.parent / clean,
            )
        )
    return pairs


def load_training_set(
    manifest: Union[str, Path], config: ModelConfig, workers: int = 1
) -> ConcatSampleSet:
    """
    Load every pair listed in a manifest.

    Raises:
        EmptyDataset: If the manifest lists no pairs
    """
    pairs = load_manifest(manifest)
    if not pairs:
        raise EmptyDataset(f"Manifest {manifest} lists no mesh pairs")
    parts = [
        build_samples(load_mesh(noisy), load_mesh(clean), config, workers=workers)
        for noisy, clean in pairs
    ]
    return ConcatSampleSet(parts)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform rotation from a normalized Gaussian quaternion."""
    w, x, y, z = rng.standard_normal(4)
    norm = np.sqrt(w * w + x * x + y * y + z * z)
    w, x, y, z = w / norm, x / norm, y / norm, z / norm
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def augment(
    sample: TrainingSample,
    seed: SeedLike,
    rotation: Optional[np.ndarray] = None,
    jitter_std: float = DEFAULT_JITTER_STD,
) -> TrainingSample:
    """
    Rotate a sample rigidly and jitter its positions.

    Every directional and positional quantity is rotated by the same ``Q``.
    Gaussian jitter then perturbs the pole and vertex entries of the spatial
    rows; targets and normal grids are not jittered.

    Args:
        sample: Normalized training sample
        seed: Seed (or seed sequence) for the rotation and jitter
        rotation: Fixed rotation to use instead of a random one
        jitter_std: Jitter standard deviation in normalized units
    """
    rng = np.random.default_rng(seed)
    q = random_rotation(rng) if rotation is None else np.asarray(rotation, dtype=np.float64)
    n = sample.size

    spatial = (sample.spatial.reshape(n, 5, 3) @ q.T).reshape(n, 15)
    if jitter_std > 0:
        noise = rng.normal(0.0, jitter_std, size=(n, 12))
        spatial[:, 0:3] += noise[:, 0:3]
        spatial[:, 6:15] += noise[:, 3:12]

    return replace(
        sample,
        grids=sample.grids @ q.T,
        spatial=spatial,
        gt_normals=sample.gt_normals @ q.T,
        gt_offsets=(sample.gt_offsets.reshape(n, 3, 3) @ q.T).reshape(n, 9),
    )
