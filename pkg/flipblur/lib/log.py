"""
Logging utilities
"""

import logging
import time
from contextlib import contextmanager
from typing import Iterator

# Common formatter
FORMATTER = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

# Stream handler (stderr, so that tables and CSV printed to stdout stay clean)
STREAM_HANDLER = logging.StreamHandler()
STREAM_HANDLER.setFormatter(FORMATTER)
STREAM_HANDLER.setLevel(logging.ERROR)


def get_logger(name: str, level: int = logging.DEBUG) -> logging.Logger:
    """
    Get a logger attached to the shared stream handler.

    Args:
        name: Logger name, e.g. `flipblur-deblur` for an app or a class name.
        level: Logging level of the logger itself. The stream handler level decides what is printed.

    Returns:
        Logger.
    """
    logger = logging.Logger(name, level)
    logger.addHandler(STREAM_HANDLER)
    return logger


def set_stream_handler_level(level: int):
    """
    Set the logging level of the stream handler.

    Args:
        level: Logging level.
    """
    STREAM_HANDLER.setLevel(level)


def set_stream_handler_verbosity(verbosity: int):
    """
    Set the verbosity of the stream handler.

    - 0 = ERROR
    - 1 = WARNING
    - 2 = INFO
    - 3 = DEBUG

    Args:
        verbosity: Verbosity level, as counted by a repeated `-v` flag.
    """
    set_stream_handler_level([logging.ERROR, logging.WARNING, logging.INFO, logging.DEBUG][max(0, min(verbosity, 3))])


@contextmanager
def log_elapsed(logger: logging.Logger, label: str) -> Iterator[None]:
    """
    Log the wall time spent inside the block at INFO level.

    Args:
        logger: Logger to report to.
        label: What the block is doing, e.g. "eigendecomposition N=1024".
    """
    start = time.perf_counter()
    try:
        yield
    finally:
        logger.info(f"{label} took {time.perf_counter() - start:.3f} s")


class LogMixin:
    """
    Logging mixin.
    """

    @property
    def logger(self) -> logging.Logger:
        """
        Instance logger.
        """
        # written through __dict__ so frozen dataclasses can mix this in
        if "_logger" not in self.__dict__:
            self.__dict__["_logger"] = get_logger(self.__class__.__name__)
        return self.__dict__["_logger"]
