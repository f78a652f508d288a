"""Logging for resosc

Diagnostics go to stderr and a rotating log file; stdout is reserved for
command results. ErrorTracker keeps a record of recoverable failures (mostly
corrupted cache files) and moves the offending files aside.
"""

import json
import logging
import logging.handlers
import shutil
import sys
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from src.config_manager import ConfigManager

DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DEFAULT_LOG_PATH = "logs/resosc.log"


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


class StderrHandler(logging.StreamHandler):
    """Console handler bound to whatever sys.stderr is at emit time"""

    def __init__(self):
        super().__init__(sys.stderr)

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value):
        pass


class LoggerSetup:
    """Builds configured loggers, one per name"""

    _loggers: Dict[str, logging.Logger] = {}

    @classmethod
    def setup_logging(cls, config: ConfigManager, name: str = "src") -> logging.Logger:
        """Configure a logger from the logging section

        Args:
            config: Configuration manager instance
            name: Logger name; "src" covers every package module

        Returns:
            The configured logger (memoised per name)
        """
        if name in cls._loggers:
            return cls._loggers[name]

        logger = logging.getLogger(name)
        level_name = str(config.get("logging.level", "INFO")).upper()
        logger.setLevel(getattr(logging, level_name, logging.INFO))
        logger.handlers.clear()

        formatter = logging.Formatter(config.get("logging.format", DEFAULT_FORMAT))
        for handler in cls._handlers(config):
            handler.setFormatter(formatter)
            logger.addHandler(handler)
        logger.propagate = False

        cls._loggers[name] = logger
        return logger

    @staticmethod
    def _handlers(config: ConfigManager) -> List[logging.Handler]:
        handlers: List[logging.Handler] = []
        if config.get("logging.console.enabled", True):
            handlers.append(StderrHandler())
        if config.get("logging.file.enabled", True):
            path = Path(config.get("logging.file.path", DEFAULT_LOG_PATH))
            path.parent.mkdir(parents=True, exist_ok=True)
            handlers.append(logging.handlers.RotatingFileHandler(
                path,
                maxBytes=config.get("logging.file.max_bytes", 10 * 1024 * 1024),
                backupCount=config.get("logging.file.backup_count", 5),
            ))
        return handlers

    @classmethod
    def get_logger(cls, name: str) -> logging.Logger:
        """Configured logger if one exists, else the plain stdlib logger"""
        return cls._loggers.get(name) or logging.getLogger(name)


class ErrorTracker:
    """Records recoverable errors and quarantines unreadable files

    Each recorded event is a dict with a UTC timestamp and the context it
    came from, so the list can be dumped as JSON unchanged.
    """

    def __init__(self, logger: Optional[logging.Logger] = None,
                 quarantine_dir: str = ".resosc_cache/quarantine"):
        self.logger = logger or logging.getLogger(__name__)
        self.quarantine_path = Path(quarantine_dir)
        self.errors: List[Dict[str, Any]] = []
        self.warnings: List[Dict[str, Any]] = []

    def log_error(self, error: Exception, context: str) -> None:
        self.errors.append({
            "timestamp": _utc_now().isoformat(),
            "context": context,
            "error_type": type(error).__name__,
            "error_message": str(error),
        })
        self.logger.error(f"{context}: {type(error).__name__} - {error}")

    def log_warning(self, message: str, context: str) -> None:
        self.warnings.append({
            "timestamp": _utc_now().isoformat(),
            "context": context,
            "message": message,
        })
        self.logger.warning(f"{context}: {message}")

    def quarantine_file(self, path: Path, reason: str) -> Path:
        """Move path into the quarantine directory with a JSON reason note

        Args:
            path: File to move
            reason: Why the file was rejected

        Returns:
            Where the file ended up
        """
        path = Path(path)
        self.quarantine_path.mkdir(parents=True, exist_ok=True)

        stamp = _utc_now()
        destination = self.quarantine_path / (
            f"{stamp.strftime('%Y%m%d_%H%M%S')}_{len(self.errors)}_{path.name}"
        )
        shutil.move(str(path), destination)
        note = {"timestamp": stamp.isoformat(), "reason": reason, "original_path": str(path)}
        destination.with_name(destination.name + ".json").write_text(json.dumps(note, indent=2))

        self.logger.warning(f"Quarantined {path} as {destination.name}: {reason}")
        return destination

    def get_error_summary(self) -> Dict[str, Any]:
        """Counts per exception type plus the raw event lists"""
        return {
            "total_errors": len(self.errors),
            "total_warnings": len(self.warnings),
            "error_types": dict(Counter(e["error_type"] for e in self.errors)),
            "errors": self.errors,
            "warnings": self.warnings,
        }

    def clear(self) -> None:
        self.errors.clear()
        self.warnings.clear()


def setup_resosc_logger(config: ConfigManager) -> logging.Logger:
    """Configure the "src" logger that every module logger hangs under"""
    return LoggerSetup.setup_logging(config, "src")
