"""
Runtime settings loaded from the environment.
Values can be placed in a .env file at the project root.
"""
import logging
import os
from fractions import Fraction

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _read_workers() -> int:
    raw = os.getenv("NESTLINE_WORKERS", "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ValueError(
            f"NESTLINE_WORKERS must be an integer, got {raw!r}. "
            "Please fix the value in your .env file."
        ) from None
    if workers < 1:
        raise ValueError("NESTLINE_WORKERS must be at least 1. Please fix the value in your .env file.")
    return workers


def _read_log_level() -> str:
    level = os.getenv("NESTLINE_LOG_LEVEL", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        raise ValueError(
            f"NESTLINE_LOG_LEVEL {level!r} is not a logging level. "
            "Use DEBUG, INFO, WARNING or ERROR in your .env file."
        )
    return level


def _read_p_max() -> Fraction:
    raw = os.getenv("NESTLINE_P_MAX", "0.1")
    try:
        p_max = Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"NESTLINE_P_MAX must be a number, got {raw!r}.") from None
    if not 0 < p_max <= 1:
        raise ValueError("NESTLINE_P_MAX must lie in (0, 1].")
    return p_max


DEFAULT_WORKERS = _read_workers()
LOG_LEVEL = _read_log_level()
DEFAULT_P_MAX = _read_p_max()


def get_workers(override: int | None = None) -> int:
    """
    Resolve the worker count for a command.

    Args:
        override: Value of the --workers flag, if given

    Returns:
        int: Number of worker processes to use
    """
    if override is None:
        return DEFAULT_WORKERS
    if override < 1:
        raise ValueError("--workers must be at least 1")
    return override
