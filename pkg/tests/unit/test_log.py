"""
Unit Tests for logging setup
"""

import json
import logging

import pytest

from amtl.log import PACKAGE_LOGGER, KeyValueFormatter, configure_logging


def _record(**extra):
    record = logging.LogRecord(
        "amtl.trainer", logging.INFO, __file__, 1, "epoch finished", None, None
    )
    for key, value in extra.items():
        setattr(record, key, value)
    return record


class TestFormatter:
    """Test key=value and JSON rendering of extra fields."""

    def test_text_appends_sorted_extras(self):
        """Test extras follow the message as sorted key=value pairs."""
        line = KeyValueFormatter().format(_record(step=3, epoch=1))
        assert line.endswith("epoch finished epoch=1 step=3")
        assert "INFO amtl.trainer" in line

    def test_json_payload(self):
        """Test one JSON object per record, extras included."""
        payload = json.loads(KeyValueFormatter(as_json=True).format(_record(loss=0.5)))
        assert payload == {
            "level": "INFO",
            "logger": "amtl.trainer",
            "message": "epoch finished",
            "loss": 0.5,
        }


class TestConfigureLogging:
    """Test handler installation."""

    @pytest.fixture(autouse=True)
    def restore(self):
        logger = logging.getLogger(PACKAGE_LOGGER)
        handlers, level, propagate = list(logger.handlers), logger.level, logger.propagate
        yield
        logger.handlers = handlers
        logger.setLevel(level)
        logger.propagate = propagate

    def test_single_handler(self):
        """Test repeated setup never stacks handlers."""
        configure_logging("INFO")
        logger = configure_logging("DEBUG")
        assert len(logger.handlers) == 1
        assert logger.level == logging.DEBUG

    def test_environment_level(self, monkeypatch):
        """Test AMTL_LOG_LEVEL applies when no level is given."""
        monkeypatch.setenv("AMTL_LOG_LEVEL", "error")
        assert configure_logging().level == logging.ERROR

    def test_default_warning(self, monkeypatch):
        """Test WARNING is the fallback level."""
        monkeypatch.delenv("AMTL_LOG_LEVEL", raising=False)
        assert configure_logging().level == logging.WARNING

    def test_output_on_stderr(self, capsys):
        """Test records go to stderr and never to stdout."""
        configure_logging("INFO")
        logging.getLogger("amtl.cli").info("resolved", extra={"seed": 7})
        captured = capsys.readouterr()
        assert captured.out == ""
        assert "resolved seed=7" in captured.err
