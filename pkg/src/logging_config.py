"""Logging configuration shared by the simulator, the fitters and the CLI."""

import logging
import time
from contextlib import contextmanager
from typing import Iterator, Optional

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(
    verbose: bool = False, logger_name: Optional[str] = None
) -> logging.Logger:
    """Install the run-wide log format and level.

    Args:
        verbose: Enable DEBUG logging (step sizes, cutoffs, sweep dispatch)
        logger_name: Name of the logger to return, defaults to the root logger
    """
    log_level = logging.DEBUG if verbose else logging.WARNING

    logging.basicConfig(level=log_level, format=LOG_FORMAT, force=True)

    logger = logging.getLogger(logger_name)
    logger.setLevel(log_level)

    return logger


def get_logger(name: str) -> logging.Logger:
    """Module logger; level and format come from setup_logging."""
    return logging.getLogger(name)


@contextmanager
def log_duration(logger: logging.Logger, label: str) -> Iterator[None]:
    """Log the wall-clock duration of a block at DEBUG level."""
    start = time.perf_counter()
    try:
        yield
    finally:
        logger.debug(f"{label} finished in {time.perf_counter() - start:.3f} s")
