"""
Run Logging

One log file per CLI invocation, ``<log root>/logs/<run name>_<UTC stamp>.log``,
rotated by size, with an optional stderr echo. Configuration is process-wide
and happens once; later calls only change the level and add the echo.

Log root: ``$MPOMDP_LOG_ROOT``, else ``$MPOMDP_OUTPUT_DIR``, else ``./outputs``.
"""

import logging
import os
import sys
from datetime import datetime, timezone
from functools import lru_cache
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import List, Optional

from modules.constants import DEFAULT_OUTPUT_DIR, LOG_ROOT_ENV, OUTPUT_DIR_ENV

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s - %(message)s"
DEFAULT_RUN_NAME = "mission_run"
MAX_LOG_BYTES = 5 * 1024 * 1024
LOG_BACKUPS = 5


@lru_cache(maxsize=1)
def _resolve_log_directory() -> Path:
    root = os.getenv(LOG_ROOT_ENV) or os.getenv(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR
    return Path(root) / "logs"


def log_file_name(run_name: Optional[str] = None, when: Optional[datetime] = None) -> str:
    """
    Example:
        >>> log_file_name("mission_verify", datetime(2025, 1, 2, 3, 4, 5, tzinfo=timezone.utc))
        'mission_verify_20250102T030405Z.log'
    """
    stamp = (when or datetime.now(timezone.utc)).strftime("%Y%m%dT%H%M%SZ")
    return f"{run_name or DEFAULT_RUN_NAME}_{stamp}.log"


def _console_handlers(root_logger: logging.Logger) -> List[logging.Handler]:
    # FileHandler subclasses StreamHandler
    return [
        h
        for h in root_logger.handlers
        if isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler)
    ]


def configure_logging(
    run_name: Optional[str] = None,
    max_bytes: int = MAX_LOG_BYTES,
    backup_count: int = LOG_BACKUPS,
    enable_console_logging: bool = True,
    log_level: int = logging.INFO,
    formatter: Optional[logging.Formatter] = None,
) -> Path:
    """
    Attach the run's rotating log file (first call only) and an optional stderr echo.

    stdout is left to the CLI's JSON output.

    Args:
        run_name: Log file prefix, e.g. ``mission_run`` or ``mission_compare``
        max_bytes: Size at which the file rotates
        backup_count: Rotated files to keep
        enable_console_logging: Echo records to stderr
        log_level: Root logger level
        formatter: Replaces the default ``LOG_FORMAT``

    Returns:
        Path: The log file of this process
    """
    formatter = formatter or logging.Formatter(LOG_FORMAT)
    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    log_file = getattr(configure_logging, "_log_file", None)
    if log_file is None:
        log_dir = _resolve_log_directory()
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file = log_dir / log_file_name(run_name)

        if not any(isinstance(h, RotatingFileHandler) for h in root_logger.handlers):
            file_handler = RotatingFileHandler(
                log_file, maxBytes=max_bytes, backupCount=backup_count, encoding="utf-8"
            )
            file_handler.setFormatter(formatter)
            root_logger.addHandler(file_handler)

        configure_logging._configured = True  # type: ignore[attr-defined]
        configure_logging._log_file = log_file  # type: ignore[attr-defined]

    if enable_console_logging and not _console_handlers(root_logger):
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(formatter)
        root_logger.addHandler(console)

    return log_file


def truncate_error_message(error_msg: Optional[str], max_length: int = 1000) -> Optional[str]:
    """
    Shorten an error message for the one-line CLI error report.

    Example:
        >>> truncate_error_message("x" * 25, 10)
        'xxxxxxxxxx... [+15 chars]'
    """
    if not error_msg:
        return None
    if len(error_msg) <= max_length:
        return error_msg
    return f"{error_msg[:max_length]}... [+{len(error_msg) - max_length} chars]"
