"""
Lab Logging
===========

Loguru-backed logging with a console sink, per-run file and JSON sinks,
and structured diagnostics records for solver stages.
"""

import sys
import logging
import traceback
from pathlib import Path
from typing import Optional, Any, Dict, List
from loguru import logger as loguru_logger

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"


class LabLogger:
    """Logger wrapper used across the lab"""

    def __init__(self, name: str = "hartree_lab", level: str = "INFO"):
        self.name = name
        self.level = level
        self._run_sinks: List[int] = []

        self._setup_loguru()
        self._setup_standard_logging()

    def _setup_loguru(self):
        """Configure the console sink"""
        loguru_logger.remove()
        loguru_logger.add(sys.stderr, format=CONSOLE_FORMAT, level=self.level)

    def _setup_standard_logging(self):
        """Route standard logging records (scipy, matplotlib) into loguru"""
        class InterceptHandler(logging.Handler):
            def emit(self, record):
                try:
                    level = loguru_logger.level(record.levelname).name
                except ValueError:
                    level = record.levelno

                frame, depth = logging.currentframe(), 2
                while frame and frame.f_code.co_filename == logging.__file__:
                    frame = frame.f_back
                    depth += 1

                loguru_logger.opt(depth=depth, exception=record.exc_info).log(level, record.getMessage())

        logging.basicConfig(handlers=[InterceptHandler()], level=logging.WARNING, force=True)

    def set_level(self, level: str):
        """Replace the console sink with one at a new level"""
        self.level = level
        self._setup_loguru()

    def attach_run_sinks(self, run_dir: Path):
        """Add the per-run text log and JSON record sinks"""
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        self.detach_run_sinks()

        self._run_sinks.append(loguru_logger.add(
            run_dir / "run.log",
            format=FILE_FORMAT,
            level="DEBUG",
            rotation="50 MB",
            retention=5,
        ))
        self._run_sinks.append(loguru_logger.add(
            run_dir / "run.json",
            format="{message}",
            level="INFO",
            serialize=True,
        ))

    def detach_run_sinks(self):
        """Remove sinks attached by attach_run_sinks"""
        for sink_id in self._run_sinks:
            try:
                loguru_logger.remove(sink_id)
            except ValueError:
                pass
        self._run_sinks = []

    def _emit(self, level: str, message: str, **kwargs):
        loguru_logger.bind(lab=self.name).opt(depth=2).log(level, message, **kwargs)

    def info(self, message: str, **kwargs):
        self._emit("INFO", message, **kwargs)

    def debug(self, message: str, **kwargs):
        self._emit("DEBUG", message, **kwargs)

    def warning(self, message: str, **kwargs):
        self._emit("WARNING", message, **kwargs)

    def error(self, message: str, exception: Optional[Exception] = None, **kwargs):
        """Log an error; with an exception attached, its traceback goes to the DEBUG sinks"""
        if exception is None:
            self._emit("ERROR", message, **kwargs)
            return
        self._emit("ERROR", f"{message}: {exception}", **kwargs)
        if exception.__traceback__ is not None:
            trace = "".join(traceback.format_exception(type(exception), exception, exception.__traceback__))
            self._emit("DEBUG", f"Traceback: {trace}")

    def critical(self, message: str, **kwargs):
        self._emit("CRITICAL", message, **kwargs)

    def log_run_record(self, stage: str, **fields: Any):
        """Emit one structured diagnostics record for a pipeline stage"""
        record: Dict[str, Any] = {k: _plain(v) for k, v in fields.items()}
        summary = " | ".join(f"{k}={_short(v)}" for k, v in record.items())
        loguru_logger.bind(stage=stage, record=record).info(f"[{stage}] {summary}")


def _plain(value: Any) -> Any:
    """Convert numpy scalars and arrays to builtin types for serialization"""
    if hasattr(value, "tolist"):
        return value.tolist()
    return value


def _short(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.4g}"
    if isinstance(value, list) and len(value) > 6:
        return f"[{', '.join(_short(v) for v in value[:6])}, ...]"
    if isinstance(value, list):
        return f"[{', '.join(_short(v) for v in value)}]"
    return str(value)


def setup_logging(name: str = "hartree_lab", level: str = "INFO") -> LabLogger:
    """Setup and return the lab logger"""
    return LabLogger(name, level)


def log_uncaught_exceptions(exc_type, exc_value, exc_tb):
    """Global uncaught exception handler"""
    if issubclass(exc_type, KeyboardInterrupt):
        sys.__excepthook__(exc_type, exc_value, exc_tb)
        return

    loguru_logger.opt(exception=(exc_type, exc_value, exc_tb)).critical("Uncaught exception")


sys.excepthook = log_uncaught_exceptions

# Global logger instance
logger = setup_logging()

__all__ = ['LabLogger', 'setup_logging', 'logger']
