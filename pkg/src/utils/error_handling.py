"""
Custom error handling for SurfaceFormer.

Every error raised by the library derives from ``SurfaceFormerError`` and
belongs to one of two categories that decide the CLI exit code:
``InputError`` (parse/IO problems, exit 2) and ``ContractViolation``
(shape, topology or compatibility problems, exit 3).
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)

EXIT_SUCCESS = 0
EXIT_UNEXPECTED = 1
EXIT_INPUT_ERROR = 2
EXIT_CONTRACT_VIOLATION = 3


class SurfaceFormerError(Exception):
    """Base exception class for SurfaceFormer."""

    exit_code = EXIT_UNEXPECTED

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class InputError(SurfaceFormerError):
    """Raised when an input file or argument cannot be read or parsed."""

    exit_code = EXIT_INPUT_ERROR


class ContractViolation(SurfaceFormerError):
    """Raised when data violates a shape, topology or compatibility contract."""

    exit_code = EXIT_CONTRACT_VIOLATION


class FileOperationError(InputError):
    """Raised when there's an error with file operations."""

    pass


class ParseError(InputError):
    """Raised for malformed mesh, manifest or binary files."""

    pass


class MeshIndexError(InputError, IndexError):
    """Raised when a face references a vertex that does not exist."""

    pass


class DegenerateFace(InputError):
    """Raised when a face repeats a vertex index."""

    pass


class ZeroAreaFace(ContractViolation):
    """Raised when a face has (numerically) zero area."""

    pass


class NoAdjacency(ContractViolation):
    """Raised when a mesh has no pair of faces sharing an edge."""

    pass


class EmptyMesh(ContractViolation):
    """Raised when an operation needs at least one face or edge."""

    pass


class DegenerateAverageNormal(ContractViolation):
    """Raised when the mean normal of a patch vanishes."""

    pass


class ShapeMismatch(ContractViolation):
    """Raised when tensor or array shapes disagree."""

    pass


class HeadDivisibility(ContractViolation):
    """Raised when the latent width is not divisible by the head count."""

    pass


class TooFewPoints(ContractViolation):
    """Raised when a k-NN graph needs more points than are available."""

    pass


class MissingGradient(ContractViolation):
    """Raised when an optimizer step finds a parameter without a gradient."""

    pass


class TopologyMismatch(ContractViolation):
    """Raised when two meshes that must correspond by index do not."""

    pass


class EmptyDataset(ContractViolation):
    """Raised when training is asked to run on no samples."""

    pass


class IncompatibleCheckpoint(ContractViolation):
    """Raised when a checkpoint does not fit the requested model or descriptor."""

    pass


def handle_error(error: Exception, context: Optional[Dict[str, Any]] = None) -> int:
    """
    Handle errors in a consistent way across the application.

    Args:
        error: The exception that was raised
        context: Additional context about the error

    Returns:
        The process exit code for this error
    """
    context = context or {}

    logger.error(
        f"Error occurred: {str(error)}",
        extra={"error_type": error.__class__.__name__, "context": context},
    )

    if isinstance(error, InputError):
        logger.error("Input Error: %s", error.message)
    elif isinstance(error, ContractViolation):
        logger.error("Contract Violation: %s", error.message)
    elif isinstance(error, SurfaceFormerError):
        logger.error("SurfaceFormer Error: %s", error.message)
    else:
        logger.error("Unexpected error: %s", str(error))

    if isinstance(error, SurfaceFormerError):
        return error.exit_code
    if isinstance(error, OSError):
        return EXIT_INPUT_ERROR
    return EXIT_UNEXPECTED


def ensure_directory_exists(path: Path) -> None:
    """
    Ensure a directory exists, creating it if necessary.

    Args:
        path: The directory path to ensure exists

    Raises:
        FileOperationError: If the directory cannot be created
    """
    try:
        path.mkdir(parents=True, exist_ok=True)
    except Exception as e:
        raise FileOperationError(
            f"Failed to create directory: {path}", {"error": str(e)}
        )


def validate_file_exists(path: Path) -> None:
    """
    Validate that a file exists.

    Args:
        path: The file path to validate

    Raises:
        FileOperationError: If the file does not exist
    """
    if not path.exists():
        raise FileOperationError(f"File does not exist: {path}", {"path": str(path)})
