"""
Logging configuration for the application.

This module sets up the application-wide logger. Console output goes to stderr so
that documents written to stdout by the command line stay byte-stable. A rotating
file handler is attached when REGRETLENS_LOG_FILE is set.
"""

import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from typing import Optional


def setup_logging(log_file: Optional[str] = None, level: str = "INFO") -> logging.Logger:
    """
    Configure application-wide logging with console and optional file handlers.

    Args:
        log_file (Optional[str]): Path to a log file. No file handler when None.
        level (str): Console log level name.

    Returns:
        logging.Logger: Configured logger instance
    """
    logger = logging.getLogger("regretlens")
    logger.setLevel(logging.DEBUG)
    logger.propagate = False

    # Re-running setup (tests, reloads) must not stack handlers
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    console_formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - %(message)s'
    )
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(getattr(logging, level.upper(), logging.INFO))
    console_handler.setFormatter(console_formatter)
    logger.addHandler(console_handler)

    if log_file:
        directory = os.path.dirname(log_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        file_formatter = logging.Formatter(
            '%(asctime)s - %(levelname)s - [%(name)s:%(funcName)s:%(lineno)d] - %(message)s'
        )
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=10*1024*1024,  # 10MB
            backupCount=5
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(file_formatter)
        logger.addHandler(file_handler)

    logger.debug("Logging has been set up successfully.")
    return logger


logger = setup_logging(
    log_file=os.getenv("REGRETLENS_LOG_FILE"),
    level=os.getenv("REGRETLENS_LOG_LEVEL", "INFO"),
)
