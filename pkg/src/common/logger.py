import datetime
import json
import logging
import sys
from logging.handlers import TimedRotatingFileHandler
from pathlib import Path as FilePath

from src.common.settings import ENV_PATH, get_settings

settings = get_settings()

# extra fields carried into the JSON log lines
STRUCTURED_KEYS = [
    "run_name", "planner", "seed", "cell", "event",
    "duration_ms", "status", "inputs", "error_type",
]
# extra fields shown as a prefix on the console
CONTEXT_KEYS = ["planner", "seed", "cell"]

STATUS_ICONS = {
    "success": "✅",
    "completed": "✅",
    "timeout": "⏳",
    "crash": "💥",
}


def log_file_path() -> FilePath:
    """Path of the rotating JSON log; the directory is created on first use."""
    log_dir = ENV_PATH.parent / settings.LOG_DIR
    log_dir.mkdir(parents=True, exist_ok=True)
    return log_dir / settings.LOG_FILENAME


class JSONFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        log_record = {
            "timestamp": datetime.datetime.fromtimestamp(record.created).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        log_record.update({key: getattr(record, key) for key in STRUCTURED_KEYS if hasattr(record, key)})
        if record.exc_info:
            log_record["exception"] = self.formatException(record.exc_info)
        return json.dumps(log_record, default=str)


class HumanReadableFormatter(logging.Formatter):
    """
    One console line per record:
    `[12:00:01] [INFO] [ropt seed=3] Episode ropt seed=3: completed (✅ COMPLETED | 812ms)`.
    """

    def format(self, record: logging.LogRecord) -> str:
        ts = datetime.datetime.fromtimestamp(record.created).strftime('%H:%M:%S')
        parts = [f"[{ts}] [{record.levelname}]"]

        context = [
            str(value) if key == "planner" else f"{key}={value}"
            for key in CONTEXT_KEYS
            if (value := getattr(record, key, None)) is not None
        ]
        if context:
            parts.append(f"[{' '.join(context)}]")
        parts.append(record.getMessage())

        if hasattr(record, "status"):
            status = str(record.status)
            icon = STATUS_ICONS.get(status, "❌")
            duration = getattr(record, "duration_ms", None)
            suffix = f"{icon} {status.upper()}" + ("" if duration is None else f" | {duration}ms")
            parts.append(f"({suffix})")
        return " ".join(parts)


def setup_logger(name: str) -> logging.Logger:
    logger = logging.getLogger(name)
    logger.setLevel(settings.LOG_LEVEL)

    if not logger.handlers:
        logger.propagate = False

        # Rotates every midnight, keeps the last 7 days.
        file_handler = TimedRotatingFileHandler(
            log_file_path(),
            when="midnight",
            interval=1,
            backupCount=7,
            encoding='utf-8',
            delay=True,
        )
        file_handler.suffix = "%Y-%m-%d"
        file_handler.setFormatter(JSONFormatter())
        file_handler.setLevel(logging.DEBUG)
        logger.addHandler(file_handler)

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(HumanReadableFormatter())
        console_handler.setLevel(settings.LOG_LEVEL)
        logger.addHandler(console_handler)

    return logger
