"""
Logging utility for the retina-limit toolkit
"""
import logging
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

from configs.settings import LOG_DIR_ENV, DEFAULT_LOG_DIR

FILE_FORMAT = logging.Formatter(
    '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)
CONSOLE_FORMAT = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s', datefmt='%H:%M:%S')


def _log_dir() -> Optional[Path]:
    value = os.getenv(LOG_DIR_ENV, DEFAULT_LOG_DIR)
    if not value:
        return None
    path = Path(value)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _file_handler(path: Path, level: int) -> logging.FileHandler:
    handler = logging.FileHandler(path, encoding='utf-8')
    handler.setLevel(level)
    handler.setFormatter(FILE_FORMAT)
    return handler


def setup_logger(name: str, level: int = logging.INFO) -> logging.Logger:
    """
    Setup logger with a stderr handler and optional daily log files

    Console output goes to stderr so that CSV/JSON written to stdout by the
    CLI stays parseable. Log files (everything, and errors only) go under the
    directory named by RETINA_LIMIT_LOG_DIR; an empty value disables them.

    Args:
        name: Logger name
        level: Console logging level

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    logger.setLevel(min(level, logging.DEBUG))

    # Avoid duplicate handlers
    if logger.handlers:
        return logger

    console = logging.StreamHandler(sys.stderr)
    console.setLevel(level)
    console.setFormatter(CONSOLE_FORMAT)
    logger.addHandler(console)

    log_dir = _log_dir()
    if log_dir is None:
        return logger

    day = datetime.now().strftime('%Y%m%d')
    logger.addHandler(_file_handler(log_dir / f"retina_limit_{day}.log", logging.DEBUG))
    logger.addHandler(_file_handler(log_dir / f"errors_{day}.log", logging.ERROR))
    return logger
