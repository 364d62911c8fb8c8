"""Centralized logging configuration."""

import logging
from typing import Optional

from food_vocab_seg.config import LOG_LEVEL


def configure_logging(level: Optional[str] = None) -> None:
    """
    Configure a consistent logging format for the entire application.

    Args:
        level: Log level name; falls back to OVFS_LOG_LEVEL
    """
    resolved = getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO)

    formatter = logging.Formatter(
        fmt="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(resolved)

    # Remove any existing handlers
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    # Logs go to stderr
    console_handler = logging.StreamHandler()
    console_handler.setLevel(resolved)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    # Third-party loggers are noisy at DEBUG
    for logger_name in ("PIL", "numpy"):
        logging.getLogger(logger_name).setLevel(max(resolved, logging.WARNING))
