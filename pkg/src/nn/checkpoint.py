"""
Checkpoint files (``SFCK``).

Layout, little-endian: magic ``SFCK``; u32 format version; u32 header length;
a UTF-8 JSON header (model configuration, library version, training step,
optimizer hyperparameters and the parameter table); then for each parameter
in table order its values, Adam first moment and Adam second moment as
float64. Keys are sorted and nothing time-dependent is stored, so the same
state always produces the same bytes.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from src.nn.module import Module
from src.utils.error_handling import (
    FileOperationError,
    IncompatibleCheckpoint,
    ParseError,
    ensure_directory_exists,
    validate_file_exists,
)
from src.utils.version import __version__, check_version_compatibility

logger = logging.getLogger(__name__)

MAGIC = b"SFCK"
FORMAT_VERSION = 1


@dataclass
class ParameterRecord:
    values: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray
    step_count: int


@dataclass
class Checkpoint:
    config: Dict[str, Any]
    step: int
    parameters: Dict[str, ParameterRecord]
    optimizer: Dict[str, float] = field(default_factory=dict)
    library_version: str = __version__

    def apply_to(self, model: Module, with_optimizer_state: bool = True) -> None:
        """
        Load values (and, optionally, Adam moments) into ``model``.

        Raises:
            IncompatibleCheckpoint: If names or shapes differ
        """
        model.load_state_dict({name: rec.values for name, rec in self.parameters.items()})
        if not with_optimizer_state:
            return
        for name, param in model.named_parameters():
            record = self.parameters[name]
            param.adam_m = record.adam_m.copy()
            param.adam_v = record.adam_v.copy()
            param.step_count = record.step_count


def encode_checkpoint(
    model: Module,
    config: Dict[str, Any],
    step: int,
    optimizer: Optional[Dict[str, float]] = None,
) -> bytes:
    named = list(model.named_parameters())
    header = {
        "config": config,
        "library_version": __version__,
        "optimizer": optimizer or {},
        "parameters": [
            {"name": name, "shape": list(param.shape), "step_count": param.step_count}
            for name, param in named
        ],
        "step": step,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode(
        "utf-8"
    )
    chunks = [
        MAGIC,
        np.array([FORMAT_VERSION, len(header_bytes)], dtype="<u4").tobytes(),
        header_bytes,
    ]
    for _, param in named:
        for array in (param.values, param.adam_m, param.adam_v):
            chunks.append(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return b"".join(chunks)


def decode_checkpoint(data: bytes) -> Checkpoint:
    """
    Parse checkpoint bytes.

    Raises:
        ParseError: On a wrong magic, malformed header or truncated payload
        IncompatibleCheckpoint: On an unknown format version or a header whose
            fields are missing or of the wrong type
    """
    if data[:4] != MAGIC or len(data) < 12:
        raise ParseError("Not an SFCK checkpoint")
    version, header_length = (
        int(v) for v in np.frombuffer(data, dtype="<u4", count=2, offset=4)
    )
    if version != FORMAT_VERSION:
        raise IncompatibleCheckpoint(
            f"Checkpoint format version {version} is not supported",
            {"supported": FORMAT_VERSION},
        )
    try:
        header = json.loads(data[12 : 12 + header_length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError("Checkpoint header is not valid JSON", {"error": str(e)})

    if not isinstance(header, dict):
        raise IncompatibleCheckpoint(
            "Checkpoint header is not an object", {"type": type(header).__name__}
        )
    library_version = str(header.get("library_version", "0.0.0"))
    if not check_version_compatibility(library_version):
        logger.warning(
            "Checkpoint written by version %s; running %s", library_version, __version__
        )

    offset = 12 + header_length
    parameters: Dict[str, ParameterRecord] = {}
    for entry in _header_list(header, "parameters"):
        name, shape, step_count = _parameter_entry(entry)
        count = int(np.prod(shape, dtype=np.int64))
        arrays = []
        for _ in range(3):
            if offset + 8 * count > len(data):
                raise ParseError("Checkpoint payload is truncated", {"parameter": name})
            arrays.append(
                np.frombuffer(data, dtype="<f8", count=count, offset=offset)
                .astype(np.float64)
                .reshape(shape)
            )
            offset += 8 * count
        parameters[name] = ParameterRecord(
            values=arrays[0], adam_m=arrays[1], adam_v=arrays[2], step_count=step_count
        )
    if offset != len(data):
        raise ParseError(
            "Checkpoint has trailing bytes", {"expected": offset, "actual": len(data)}
        )

    config = header.get("config", {})
    optimizer = header.get("optimizer", {})
    if not isinstance(config, dict) or not isinstance(optimizer, dict):
        raise IncompatibleCheckpoint("Checkpoint config and optimizer must be objects")
    try:
        step = int(header.get("step", 0))
    except (TypeError, ValueError) as e:
        raise IncompatibleCheckpoint(
            "Checkpoint step is not an integer", {"error": str(e)}
        )
    return Checkpoint(
        config=config,
        step=step,
        parameters=parameters,
        optimizer=optimizer,
        library_version=library_version,
    )


def _header_list(header: Dict[str, Any], key: str) -> List[Any]:
    value = header.get(key, [])
    if not isinstance(value, list):
        raise IncompatibleCheckpoint(f"Checkpoint header field {key!r} is not a list")
    return value


def _parameter_entry(entry: Any) -> Tuple[str, Tuple[int, ...], int]:
    """
    Name, shape and Adam step count of one header parameter entry.

    Raises:
        IncompatibleCheckpoint: If a field is missing or has the wrong type
    """
    try:
        name = entry["name"]
        shape = tuple(int(size) for size in entry["shape"])
        step_count = int(entry.get("step_count", 0))
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise IncompatibleCheckpoint(
            "Malformed parameter entry in checkpoint header",
            {"entry": repr(entry)[:80], "error": repr(e)},
        )
    if not isinstance(name, str) or any(size < 0 for size in shape):
        raise IncompatibleCheckpoint(
            "Malformed parameter entry in checkpoint header",
            {"entry": repr(entry)[:80]},
        )
    return name, shape, step_count


def save_checkpoint(
    path: Union[str, Path],
    model: Module,
    config: Dict[str, Any],
    step: int,
    optimizer: Optional[Dict[str, float]] = None,
) -> None:
    path = Path(path)
    if path.parent != Path(""):
        ensure_directory_exists(path.parent)
    try:
        path.write_bytes(encode_checkpoint(model, config, step, optimizer))
    except OSError as e:
        raise FileOperationError(f"Failed to write checkpoint: {path}", {"error": str(e)})
    logger.info("Checkpoint written to %s (step %d)", path, step)


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    validate_file_exists(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FileOperationError(f"Failed to read checkpoint: {path}", {"error": str(e)})
    return decode_checkpoint(data)
