"""
Binary descriptor dump (``LSD1``).

Layout, little-endian: magic ``LSD1``; u32 patch size; u32 grid side;
G as float32 row-major; S as float32; validity mask as u8; then R (row-major),
c_0 and M_v as float64.
"""

from pathlib import Path
from typing import Tuple, Union

import numpy as np

from src.descriptor.lsd import SPATIAL_WIDTH, LocalSurfaceDescriptor
from src.descriptor.normalization import NormalizationContext
from src.utils.error_handling import (
    FileOperationError,
    ParseError,
    ensure_directory_exists,
    validate_file_exists,
)

MAGIC = b"LSD1"


def encode_lsd(lsd: LocalSurfaceDescriptor, ctx: NormalizationContext) -> bytes:
    header = np.array([lsd.size, lsd.grid_side], dtype="<u4")
    context = np.concatenate(
        [np.asarray(ctx.rotation).ravel(), np.asarray(ctx.c_0).ravel(), [ctx.M_v]]
    )
    return b"".join(
        [
            MAGIC,
            header.tobytes(),
            lsd.grids.astype("<f4").tobytes(order="C"),
            lsd.spatial.astype("<f4").tobytes(order="C"),
            lsd.valid.astype("u1").tobytes(order="C"),
            context.astype("<f8").tobytes(),
        ]
    )


def decode_lsd(data: bytes) -> Tuple[LocalSurfaceDescriptor, NormalizationContext]:
    """
    Parse an ``LSD1`` buffer.

    Raises:
        ParseError: On a wrong magic or a truncated/oversized buffer
    """
    if data[:4] != MAGIC:
        raise ParseError("Not an LSD1 descriptor dump", {"magic": data[:4].hex()})
    if len(data) < 12:
        raise ParseError("Descriptor dump is truncated", {"bytes": len(data)})
    size, side = (int(v) for v in np.frombuffer(data, dtype="<u4", count=2, offset=4))

    grid_count = size * side * side * 3
    spatial_count = size * SPATIAL_WIDTH
    mask_count = size * side * side
    expected = 12 + 4 * grid_count + 4 * spatial_count + mask_count + 8 * 13
    if len(data) != expected:
        raise ParseError(
            "Descriptor dump has the wrong length",
            {"expected": expected, "actual": len(data)},
        )

    offset = 12
    grids = np.frombuffer(data, dtype="<f4", count=grid_count, offset=offset)
    offset += 4 * grid_count
    spatial = np.frombuffer(data, dtype="<f4", count=spatial_count, offset=offset)
    offset += 4 * spatial_count
    mask = np.frombuffer(data, dtype="u1", count=mask_count, offset=offset)
    offset += mask_count
    context = np.frombuffer(data, dtype="<f8", count=13, offset=offset)

    lsd = LocalSurfaceDescriptor(
        grids=grids.astype(np.float64).reshape(size, side, side, 3),
        spatial=spatial.astype(np.float64).reshape(size, SPATIAL_WIDTH),
        valid=mask.reshape(size, side, side).astype(bool),
    )
    ctx = NormalizationContext(
        rotation=context[:9].reshape(3, 3).copy(),
        c_0=context[9:12].copy(),
        M_v=float(context[12]),
    )
    return lsd, ctx


def write_lsd_dump(
    path: Union[str, Path], lsd: LocalSurfaceDescriptor, ctx: NormalizationContext
) -> None:
    path = Path(path)
    if path.parent != Path(""):
        ensure_directory_exists(path.parent)
    try:
        path.write_bytes(encode_lsd(lsd, ctx))
    except OSError as e:
        raise FileOperationError(f"Failed to write descriptor: {path}", {"error": str(e)})


def read_lsd_dump(
    path: Union[str, Path]
) -> Tuple[LocalSurfaceDescriptor, NormalizationContext]:
    path = Path(path)
    validate_file_exists(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FileOperationError(f"Failed to read descriptor: {path}", {"error": str(e)})
    return decode_lsd(data)
