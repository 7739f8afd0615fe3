"""
Unit Tests for Logging Setup
"""

import io
import json
import sys

import pytest
import structlog

from src.utils import configure_logging, get_logger


@pytest.fixture(autouse=True)
def restore_logging():
    yield
    configure_logging()


class TestGetLogger:
    """Tests for module loggers."""

    def test_logs_before_configuration(self, capsys):
        """Test that a module logger emits events with the default structlog setup."""
        structlog.reset_defaults()

        get_logger("flowembed.unconfigured").info("stage_started", stage="ingest")

        captured = capsys.readouterr()
        assert "stage_started" in captured.out + captured.err

    def test_logger_name_recorded(self, capsys):
        """Test that the module name is attached to every JSON event."""
        configure_logging("INFO", "json")

        get_logger("src.pipeline.runner").info("stage_finished", stage="train")

        event = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert event["event"] == "stage_finished"
        assert event["logger"] == "src.pipeline.runner"
        assert event["level"] == "info"
        assert event["stage"] == "train"


class TestConfigureLogging:
    """Tests for level filtering and stream routing."""

    def test_stdout_stays_clean(self, capsys):
        """Test that events go to stderr and never to stdout."""
        configure_logging("DEBUG", "console")

        get_logger("flowembed.test").debug("detail", value=3)

        captured = capsys.readouterr()
        assert captured.out == ""
        assert "detail" in captured.err

    def test_level_filter(self, capsys):
        """Test that events below the configured level are dropped."""
        configure_logging("WARNING", "json")
        logger = get_logger("flowembed.test")

        logger.info("quiet")
        logger.warning("loud")

        err = capsys.readouterr().err
        assert "quiet" not in err
        assert "loud" in err

    def test_unknown_level_falls_back_to_info(self, capsys):
        """Test that an unknown level name behaves like INFO."""
        configure_logging("CHATTY", "json")
        logger = get_logger("flowembed.test")

        logger.debug("hidden")
        logger.info("shown")

        err = capsys.readouterr().err
        assert "hidden" not in err
        assert "shown" in err

    def test_follows_replaced_stderr(self, monkeypatch):
        """Test that events reach the current sys.stderr after it is swapped out."""
        configure_logging("INFO", "json")
        first, second = io.StringIO(), io.StringIO()

        monkeypatch.setattr(sys, "stderr", first)
        get_logger("flowembed.test").info("first_event")
        first.close()
        monkeypatch.setattr(sys, "stderr", second)
        get_logger("flowembed.test").info("second_event")

        assert "second_event" in second.getvalue()


class TestAcrossCaptures:
    """Tests for logging that outlives one captured stream."""

    def test_configure_under_first_capture(self, capsys):
        """Test that configuring under one capture logs to that capture."""
        configure_logging("INFO", "console")

        get_logger("flowembed.test").info("under_first_capture")

        assert "under_first_capture" in capsys.readouterr().err

    def test_log_under_second_capture(self, capsys):
        """Test that a later capture receives events without reconfiguring."""
        get_logger("flowembed.test").info("under_second_capture")

        assert "under_second_capture" in capsys.readouterr().err
