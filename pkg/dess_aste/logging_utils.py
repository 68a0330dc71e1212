"""Structured JSON logging shared by every module."""

import json
import logging
import os
from datetime import datetime, timezone
from typing import Any, Optional


class JsonFormatter(logging.Formatter):
    """Render a record as one JSON object per line"""

    def format(self, record: logging.LogRecord) -> str:
        payload = getattr(record, "payload", None)
        if payload is None:
            payload = {
                "event": "message",
                "timestamp": datetime.fromtimestamp(record.created, timezone.utc).isoformat(),
                "message": record.getMessage(),
            }
        payload = dict(payload)
        payload.setdefault("level", record.levelname.lower())
        payload.setdefault("logger", record.name)
        return json.dumps(payload, default=str, sort_keys=False)


def configure_logging(level: Optional[str] = None) -> None:
    """
    Install the JSON formatter on the package logger

    Args:
        level: Level name; falls back to the DESS_LOG environment variable, then WARNING
    """
    name = (level or os.getenv("DESS_LOG") or "WARNING").upper()
    resolved = logging.getLevelName(name)
    if not isinstance(resolved, int):
        resolved = logging.WARNING

    root = logging.getLogger("dess_aste")
    root.setLevel(resolved)
    if not any(isinstance(h.formatter, JsonFormatter) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(JsonFormatter())
        root.addHandler(handler)


def log_event(logger: logging.Logger, event: str, level: int = logging.INFO, **fields: Any) -> None:
    """Structured logging for pipeline events"""
    log_data = {
        "event": event,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    log_data.update({k: v for k, v in fields.items() if v is not None})
    logger.log(level, json.dumps(log_data, default=str), extra={"payload": log_data})
