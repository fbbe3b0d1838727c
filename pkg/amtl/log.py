"""
Logging setup for the amtl package.

Library modules only ever call ``logging.getLogger(__name__)``; handlers are
installed once, by the CLI or a script, through ``configure_logging``.
"""

import json
import logging
import os
import sys
from typing import Optional

PACKAGE_LOGGER = "amtl"

_RESERVED = set(vars(logging.LogRecord("", 0, "", 0, "", None, None)))


class KeyValueFormatter(logging.Formatter):
    """Render ``extra=`` fields after the message as ``key=value`` pairs."""

    def __init__(self, as_json: bool = False):
        super().__init__("%(asctime)s %(levelname)s %(name)s: %(message)s")
        self.as_json = as_json

    def format(self, record: logging.LogRecord) -> str:
        extras = {k: v for k, v in vars(record).items() if k not in _RESERVED}
        if self.as_json:
            payload = {
                "level": record.levelname,
                "logger": record.name,
                "message": record.getMessage(),
                **extras,
            }
            return json.dumps(payload, default=str, sort_keys=True)
        line = super().format(record)
        if extras:
            line += " " + " ".join(f"{k}={v}" for k, v in sorted(extras.items()))
        return line


def configure_logging(level: Optional[str] = None, as_json: bool = False) -> logging.Logger:
    """
    Install a single stderr handler on the package logger.

    Args:
        level: Level name; falls back to AMTL_LOG_LEVEL, then WARNING
        as_json: Emit one JSON object per line instead of text

    Returns:
        The configured package logger
    """
    level_name = (level or os.environ.get("AMTL_LOG_LEVEL") or "WARNING").upper()
    logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(KeyValueFormatter(as_json=as_json))
    logger.addHandler(handler)
    logger.setLevel(level_name)
    logger.propagate = False
    return logger
