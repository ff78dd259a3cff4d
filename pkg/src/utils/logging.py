"""Level lookup and stage timing for SurfaceFormer log records."""

import logging
import os
import time
from contextlib import contextmanager
from typing import Iterator, Optional

LOG_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}


def get_log_level(level_name: Optional[str] = None) -> int:
    """
    Map a level name to its logging constant.

    Args:
        level_name: Case-insensitive level name; SF_LOG_LEVEL when omitted

    Returns:
        The matching constant, or INFO for unknown names
    """
    if level_name is None:
        level_name = os.environ.get("SF_LOG_LEVEL", "INFO")
    return LOG_LEVELS.get(level_name.upper(), logging.INFO)


class StageTimer:
    """Wall-clock duration of one pipeline stage, filled in on exit."""

    def __init__(self, stage: str):
        self.stage = stage
        self.seconds: Optional[float] = None


@contextmanager
def log_stage(
    logger: logging.Logger, stage: str, level: int = logging.DEBUG
) -> Iterator[StageTimer]:
    """
    Log how long the wrapped block took.

    Nothing is logged if the block raises; the exception propagates.

    Args:
        logger: Logger receiving the record
        stage: Short name of the work, e.g. ``"descriptors"``
        level: Record level

    Yields:
        StageTimer whose ``seconds`` is set once the block finishes
    """
    timer = StageTimer(stage)
    start = time.perf_counter()
    yield timer
    timer.seconds = time.perf_counter() - start
    logger.log(level, "%s took %.3fs", stage, timer.seconds)
