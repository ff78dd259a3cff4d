"""
Library version and the rule for reading checkpoints written by other versions.

Every checkpoint header carries ``library_version``. A checkpoint is readable
when it shares the running major version and does not come from a newer minor
release, which may have added header fields this release ignores.
"""

import platform
from typing import Dict, Tuple

import numpy as np

__version__ = "0.1.0"


def parse_version(version_str: str) -> Tuple[int, int, int]:
    """
    Split ``MAJOR.MINOR.PATCH`` into integers.

    Raises:
        ValueError: Unless the string is exactly three dot-separated integers
    """
    parts = version_str.split(".")
    if len(parts) != 3 or not all(part.isdigit() for part in parts):
        raise ValueError(f"Invalid version string: {version_str!r}")
    major, minor, patch = (int(part) for part in parts)
    return major, minor, patch


def get_version() -> str:
    return __version__


def get_version_info() -> Dict[str, str]:
    """Versions of the library and of the runtime it computes with."""
    return {
        "version": __version__,
        "python_version": platform.python_version(),
        "numpy_version": np.__version__,
        "platform": platform.system().lower() or "unknown",
    }


def check_version_compatibility(required_version: str) -> bool:
    """
    Whether a checkpoint written by ``required_version`` can be read.

    Malformed version strings are never compatible.
    """
    try:
        written = parse_version(required_version)
    except ValueError:
        return False
    running = parse_version(__version__)
    return written[0] == running[0] and written[1] <= running[1]
