"""Logging configuration for EmbodySim."""

import logging
import os
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional


def setup_logging(debug: Optional[bool] = None) -> Optional[Path]:
    """Configure file logging for EmbodySim.

    Logging is only enabled in debug mode, either requested explicitly or
    through ``EMBODYSIM_DEBUG=1``. Logs go to ./logs/EmbodySim.log with
    rotation so long generation runs cannot fill the disk.

    Args:
        debug: Force debug mode on or off; None defers to the environment

    Returns:
        Path: Path to the log file, or None if logging is disabled
    """
    if debug is None:
        debug = os.environ.get("EMBODYSIM_DEBUG") == "1"

    if not debug:
        logging.getLogger().setLevel(logging.CRITICAL)
        return None

    log_dir = Path("./logs")
    log_dir.mkdir(parents=True, exist_ok=True)
    log_file = log_dir / "EmbodySim.log"

    file_formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(threadName)s - %(message)s"
    )

    # 20MB per file, 2 backups
    file_handler = RotatingFileHandler(
        log_file, maxBytes=20 * 1024 * 1024, backupCount=2
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(file_formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)
    if not any(
        isinstance(h, RotatingFileHandler)
        and Path(h.baseFilename).resolve() == log_file.resolve()
        for h in root_logger.handlers
    ):
        root_logger.addHandler(file_handler)

    return log_file
