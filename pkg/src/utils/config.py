"""
Configuration module for SurfaceFormer.

This module loads configuration from environment variables (and a local
``.env`` file, if present) with the standard parameter settings
as defaults.
"""

import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv

load_dotenv()

# Model configuration
DEFAULT_PRESET = os.environ.get("SF_PRESET", "middle").lower()
MODEL_PRESETS = ("small", "middle", "large")

# Descriptor configuration
DEFAULT_PATCH_FACES = int(os.environ.get("SF_PATCH_FACES", "240"))
DEFAULT_SAMPLING_PRECISION = int(os.environ.get("SF_SAMPLING_PRECISION", "8"))
DEFAULT_GRID_HALF_SIDE = int(
    os.environ.get("SF_GRID_HALF_SIDE", str(round(1.25 * DEFAULT_SAMPLING_PRECISION)))
)
DEFAULT_KNN_K = int(os.environ.get("SF_KNN_K", "20"))

# Inference configuration
DEFAULT_REFINE_ITERATIONS = int(os.environ.get("SF_REFINE_ITERATIONS", "60"))
DEFAULT_WORKERS = int(os.environ.get("SF_WORKERS", "1"))

# Training configuration
DEFAULT_LEARNING_RATE = float(os.environ.get("SF_LEARNING_RATE", "0.0001"))
DEFAULT_BATCH_SIZE = int(os.environ.get("SF_BATCH_SIZE", "80"))
DEFAULT_ITERATIONS = int(os.environ.get("SF_ITERATIONS", "100000"))
DEFAULT_LOSS_ALPHA = float(os.environ.get("SF_LOSS_ALPHA", "1.0"))
DEFAULT_SEED = int(os.environ.get("SF_SEED", "0"))
DEFAULT_CHECKPOINT_EVERY = int(os.environ.get("SF_CHECKPOINT_EVERY", "500"))
DEFAULT_JITTER_STD = float(os.environ.get("SF_JITTER_STD", "0.01"))

# Logging configuration
DEFAULT_LOG_LEVEL = os.environ.get("SF_LOG_LEVEL", "INFO").upper()
DEFAULT_LOG_DIR = os.environ.get("SF_LOG_DIR", "logs")


def _validate_preset(preset: str, errors: Dict[str, str]) -> None:
    """Validate the model size preset."""
    if preset not in MODEL_PRESETS:
        errors["SF_PRESET"] = (
            f"Invalid preset: {preset}. Must be one of {', '.join(MODEL_PRESETS)}"
        )


def _validate_positive(name: str, value: float, errors: Dict[str, str]) -> None:
    """Validate a strictly positive setting."""
    if value <= 0:
        errors[name] = f"Invalid value for {name}: {value}. Must be greater than 0"


def _validate_non_negative(name: str, value: float, errors: Dict[str, str]) -> None:
    """Validate a setting that may be zero but not negative."""
    if value < 0:
        errors[name] = f"Invalid value for {name}: {value}. Must not be negative"


def _validate_log_level(level: str, errors: Dict[str, str]) -> None:
    """Validate the log level name."""
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        errors["SF_LOG_LEVEL"] = f"Invalid log level: {level}"


def validate_config() -> Dict[str, str]:
    """
    Validate the configuration and return any errors.

    Returns:
        A dictionary of error messages or an empty dict if no errors.
    """
    errors: Dict[str, str] = {}

    _validate_preset(DEFAULT_PRESET, errors)

    _validate_positive("SF_PATCH_FACES", DEFAULT_PATCH_FACES, errors)
    _validate_positive("SF_SAMPLING_PRECISION", DEFAULT_SAMPLING_PRECISION, errors)
    _validate_positive("SF_GRID_HALF_SIDE", DEFAULT_GRID_HALF_SIDE, errors)
    _validate_positive("SF_KNN_K", DEFAULT_KNN_K, errors)
    _validate_positive("SF_WORKERS", DEFAULT_WORKERS, errors)
    _validate_positive("SF_BATCH_SIZE", DEFAULT_BATCH_SIZE, errors)
    _validate_positive("SF_LOSS_ALPHA", DEFAULT_LOSS_ALPHA, errors)
    _validate_positive("SF_CHECKPOINT_EVERY", DEFAULT_CHECKPOINT_EVERY, errors)

    _validate_non_negative("SF_REFINE_ITERATIONS", DEFAULT_REFINE_ITERATIONS, errors)
    _validate_non_negative("SF_LEARNING_RATE", DEFAULT_LEARNING_RATE, errors)
    _validate_non_negative("SF_ITERATIONS", DEFAULT_ITERATIONS, errors)
    _validate_non_negative("SF_JITTER_STD", DEFAULT_JITTER_STD, errors)

    _validate_log_level(DEFAULT_LOG_LEVEL, errors)

    return errors


def get_config(key: Optional[str] = None, default: Any = None) -> Any:
    """
    Get configuration values.

    Args:
        key: Optional key to retrieve a specific config value
        default: Default value to return if the key is not found

    Returns:
        Either a specific config value or the entire config dictionary
    """
    config = {
        "SF_PRESET": DEFAULT_PRESET,
        "SF_PATCH_FACES": DEFAULT_PATCH_FACES,
        "SF_SAMPLING_PRECISION": DEFAULT_SAMPLING_PRECISION,
        "SF_GRID_HALF_SIDE": DEFAULT_GRID_HALF_SIDE,
        "SF_KNN_K": DEFAULT_KNN_K,
        "SF_REFINE_ITERATIONS": DEFAULT_REFINE_ITERATIONS,
        "SF_WORKERS": DEFAULT_WORKERS,
        "SF_LEARNING_RATE": DEFAULT_LEARNING_RATE,
        "SF_BATCH_SIZE": DEFAULT_BATCH_SIZE,
        "SF_ITERATIONS": DEFAULT_ITERATIONS,
        "SF_LOSS_ALPHA": DEFAULT_LOSS_ALPHA,
        "SF_SEED": DEFAULT_SEED,
        "SF_CHECKPOINT_EVERY": DEFAULT_CHECKPOINT_EVERY,
        "SF_JITTER_STD": DEFAULT_JITTER_STD,
        "SF_LOG_LEVEL": DEFAULT_LOG_LEVEL,
        "SF_LOG_DIR": DEFAULT_LOG_DIR,
    }

    if key is not None:
        return config.get(key, default)

    return config
