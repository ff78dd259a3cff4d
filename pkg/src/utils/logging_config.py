"""
Logging configuration for SurfaceFormer command-line runs.
"""

import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional, Union

from rich.console import Console
from rich.logging import RichHandler

from src.utils.logging import get_log_level

LOG_FILE_NAME = "surfaceformer.log"

# Marks handlers installed here so a second call can replace them
_HANDLER_TAG = "_surfaceformer_handler"


def setup_logging(
    level: Optional[Union[str, int]] = None, log_dir: Optional[str] = "logs"
) -> logging.Logger:
    """Configure the root logger for the application."""
    root_logger = logging.getLogger()
    for handler in root_logger.handlers[:]:
        if getattr(handler, _HANDLER_TAG, False):
            root_logger.removeHandler(handler)
            handler.close()

    if isinstance(level, str) or level is None:
        level = get_log_level(level)
    root_logger.setLevel(level)

    if log_dir:
        log_path = Path(log_dir)
        log_path.mkdir(parents=True, exist_ok=True)

        file_handler = RotatingFileHandler(
            log_path / LOG_FILE_NAME, maxBytes=1024 * 1024, backupCount=5  # 1MB
        )
        file_handler.setFormatter(
            logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        )
        setattr(file_handler, _HANDLER_TAG, True)
        root_logger.addHandler(file_handler)

    console_handler = RichHandler(
        console=Console(stderr=True), show_path=False, rich_tracebacks=False
    )
    console_handler.setFormatter(logging.Formatter("%(message)s"))
    setattr(console_handler, _HANDLER_TAG, True)
    root_logger.addHandler(console_handler)

    logger = logging.getLogger(__name__)
    logger.debug("Logging configured successfully")

    return logger
