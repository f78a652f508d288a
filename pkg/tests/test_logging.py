"""Unit tests for logging setup and error tracking"""

import io
import json
import logging
import logging.handlers
import sys

import pytest

from src.config_manager import ConfigManager
from src.logging_config import LoggerSetup, ErrorTracker, setup_resosc_logger


@pytest.fixture
def stub_config(mocker, tmp_path):
    """ConfigManager stand-in answering from a flat dotted-key dict"""
    values = {
        "logging.level": "warning",
        "logging.format": "%(levelname)s|%(message)s",
        "logging.console.enabled": False,
        "logging.file.enabled": True,
        "logging.file.path": str(tmp_path / "logs" / "run.log"),
        "logging.file.max_bytes": 2048,
        "logging.file.backup_count": 2,
    }
    config = mocker.Mock(spec=ConfigManager)
    config.get.side_effect = lambda key, default=None: values.get(key, default)
    return config


def _console(logger):
    return [h for h in logger.handlers
            if isinstance(h, logging.StreamHandler)
            and not isinstance(h, logging.handlers.RotatingFileHandler)]


def _files(logger):
    return [h for h in logger.handlers if isinstance(h, logging.handlers.RotatingFileHandler)]


class TestLoggerSetup:
    """Test suite for LoggerSetup"""

    def test_dev_config_levels_and_handlers(self, config):
        """Test the dev overlay gives DEBUG with stderr console and file handlers"""
        logger = LoggerSetup.setup_logging(config, "resosc.test.dev")

        assert logger.level == logging.DEBUG
        assert len(_console(logger)) == 1
        assert _console(logger)[0].stream is sys.stderr
        assert len(_files(logger)) == 1

    def test_console_follows_replaced_stderr(self, stub_config, monkeypatch):
        """Test a memoised logger writes to the current sys.stderr, not the one at setup"""
        stub_config.get.side_effect = lambda key, default=None: {
            "logging.format": "%(levelname)s|%(message)s",
            "logging.console.enabled": True,
            "logging.file.enabled": False,
        }.get(key, default)
        logger = LoggerSetup.setup_logging(stub_config, "resosc.test.stderr")
        first, second = io.StringIO(), io.StringIO()

        monkeypatch.setattr(sys, "stderr", first)
        logger.warning("first run")
        first.close()
        monkeypatch.setattr(sys, "stderr", second)
        logger.warning("second run")

        assert second.getvalue() == "WARNING|second run\n"

    def test_handlers_follow_config(self, stub_config, tmp_path):
        """Test level, format, rotation and console switch come from configuration"""
        logger = LoggerSetup.setup_logging(stub_config, "resosc.test.stub")

        assert logger.level == logging.WARNING
        assert _console(logger) == []
        handler = _files(logger)[0]
        assert handler.maxBytes == 2048
        assert handler.backupCount == 2
        assert (tmp_path / "logs").is_dir()

        logger.warning("pole on contour")
        handler.flush()
        assert (tmp_path / "logs" / "run.log").read_text() == "WARNING|pole on contour\n"

    def test_unknown_level_falls_back_to_info(self, stub_config):
        """Test an unrecognised level name yields INFO"""
        stub_config.get.side_effect = lambda key, default=None: (
            "chatty" if key == "logging.level" else default)

        logger = LoggerSetup.setup_logging(stub_config, "resosc.test.unknown")

        assert logger.level == logging.INFO

    def test_setup_is_memoised(self, config):
        """Test a second setup for the same name returns the first logger untouched"""
        first = LoggerSetup.setup_logging(config, "resosc.test.memo")
        handlers = list(first.handlers)

        second = LoggerSetup.setup_logging(config, "resosc.test.memo")

        assert second is first
        assert second.handlers == handlers
        assert LoggerSetup.get_logger("resosc.test.memo") is first

    def test_get_logger_unconfigured(self):
        """Test get_logger falls back to the plain stdlib logger"""
        assert LoggerSetup.get_logger("resosc.test.never") is logging.getLogger("resosc.test.never")

    def test_module_loggers_hang_under_package_logger(self, config):
        """Test module loggers inherit the configured package logger"""
        logger = setup_resosc_logger(config)

        assert logger.name == "src"
        assert logger.propagate is False
        assert logging.getLogger("src.borel_resummation").parent is logger


class TestErrorTracker:
    """Test suite for ErrorTracker"""

    def test_log_error_records_context(self):
        """Test errors are kept with type, message and context"""
        tracker = ErrorTracker()

        tracker.log_error(ValueError("order must be positive"), "series")

        assert tracker.errors[0]["error_type"] == "ValueError"
        assert tracker.errors[0]["error_message"] == "order must be positive"
        assert tracker.errors[0]["context"] == "series"

    def test_log_warning(self, caplog):
        """Test warnings are kept and forwarded to the logger"""
        tracker = ErrorTracker(logging.getLogger("resosc.test.tracker"))

        with caplog.at_level(logging.WARNING, logger="resosc.test.tracker"):
            tracker.log_warning("froissart doublet dropped", "pade")

        assert tracker.warnings[0]["message"] == "froissart doublet dropped"
        assert "pade: froissart doublet dropped" in caplog.text

    def test_quarantine_moves_file_with_note(self, tmp_path):
        """Test a rejected cache file is moved aside next to a JSON reason"""
        source = tmp_path / "level_0.txt"
        source.write_text("garbage\n")
        tracker = ErrorTracker(quarantine_dir=str(tmp_path / "quarantine"))

        destination = tracker.quarantine_file(source, "malformed header")

        assert not source.exists()
        assert destination.parent == tmp_path / "quarantine"
        assert destination.name.endswith("_level_0.txt")
        assert destination.read_text() == "garbage\n"
        note = json.loads(destination.with_name(destination.name + ".json").read_text())
        assert note["reason"] == "malformed header"
        assert note["original_path"] == str(source)

    def test_repeat_quarantine_does_not_collide(self, tmp_path):
        """Test the same file name quarantined twice keeps both copies"""
        tracker = ErrorTracker(quarantine_dir=str(tmp_path / "quarantine"))
        source = tmp_path / "level_1.txt"

        source.write_text("first\n")
        tracker.log_error(ValueError("bad"), "cache")
        first = tracker.quarantine_file(source, "bad")
        source.write_text("second\n")
        tracker.log_error(ValueError("bad"), "cache")
        second = tracker.quarantine_file(source, "bad")

        assert first != second
        assert first.read_text() == "first\n"
        assert second.read_text() == "second\n"

    def test_summary_counts_by_type(self):
        """Test the summary tallies exceptions per type"""
        tracker = ErrorTracker()

        tracker.log_error(ValueError("a"), "c1")
        tracker.log_error(ValueError("b"), "c2")
        tracker.log_error(KeyError("c"), "c3")
        tracker.log_warning("w", "c4")
        summary = tracker.get_error_summary()

        assert summary["total_errors"] == 3
        assert summary["total_warnings"] == 1
        assert summary["error_types"] == {"ValueError": 2, "KeyError": 1}

    def test_clear(self):
        """Test clearing drops errors and warnings"""
        tracker = ErrorTracker()
        tracker.log_error(ValueError("e"), "c")
        tracker.log_warning("w", "c")

        tracker.clear()

        assert tracker.get_error_summary()["total_errors"] == 0
        assert tracker.warnings == []
