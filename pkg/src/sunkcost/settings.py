# settings.py
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class SettingsError(ValueError):
    pass


def _optional_int(name: str) -> int | None:
    raw = os.getenv(name, "").strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError as e:
        raise SettingsError(f"{name} must be an integer, got {raw!r}") from e


def _int_or(name: str, default: int) -> int:
    value = _optional_int(name)
    return default if value is None else value


@dataclass(frozen=True)
class Settings:
    """Process-level settings read from SUNKCOST_* environment variables (.env honored)."""

    log_level: str = field(
        default_factory=lambda: os.getenv("SUNKCOST_LOG_LEVEL", "INFO").upper()
    )
    workers: int = field(default_factory=lambda: _int_or("SUNKCOST_WORKERS", 1))
    metrics_port: int | None = field(
        default_factory=lambda: _optional_int("SUNKCOST_METRICS_PORT")
    )
    otlp_endpoint: str | None = field(
        default_factory=lambda: os.getenv("SUNKCOST_OTLP_ENDPOINT") or None
    )
    out: str | None = field(default_factory=lambda: os.getenv("SUNKCOST_OUT") or None)

    def __post_init__(self) -> None:
        if self.log_level not in LOG_LEVELS:
            raise SettingsError(
                f"SUNKCOST_LOG_LEVEL must be one of {LOG_LEVELS}, got {self.log_level!r}"
            )
        if self.workers < 1:
            raise SettingsError(f"SUNKCOST_WORKERS must be >= 1, got {self.workers}")
        if self.metrics_port is not None and not 0 < self.metrics_port < 65536:
            raise SettingsError(f"SUNKCOST_METRICS_PORT out of range: {self.metrics_port}")
        if self.out is not None and not self.out.strip():
            raise SettingsError("SUNKCOST_OUT must be a non-empty path")

    @property
    def level(self) -> int:
        return logging.getLevelName(self.log_level)
