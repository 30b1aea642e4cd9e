"""Tests for environment-driven settings"""
import logging

import pytest

from sunkcost.settings import Settings, SettingsError

ENV_VARS = (
    "SUNKCOST_LOG_LEVEL",
    "SUNKCOST_WORKERS",
    "SUNKCOST_METRICS_PORT",
    "SUNKCOST_OTLP_ENDPOINT",
    "SUNKCOST_OUT",
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ENV_VARS:
        monkeypatch.delenv(name, raising=False)


class TestSettings:
    """Test Settings defaults and validation"""

    def test_defaults(self):
        """Test an empty environment gives INFO, one worker and no exporters"""
        settings = Settings()
        assert settings.log_level == "INFO"
        assert settings.level == logging.INFO
        assert settings.workers == 1
        assert settings.metrics_port is None
        assert settings.otlp_endpoint is None
        assert settings.out is None

    def test_reads_environment(self, monkeypatch):
        """Test every variable is picked up"""
        monkeypatch.setenv("SUNKCOST_LOG_LEVEL", "debug")
        monkeypatch.setenv("SUNKCOST_WORKERS", "4")
        monkeypatch.setenv("SUNKCOST_METRICS_PORT", "9100")
        monkeypatch.setenv("SUNKCOST_OTLP_ENDPOINT", "localhost:4317")
        monkeypatch.setenv("SUNKCOST_OUT", "/tmp/runs")
        settings = Settings()
        assert settings.log_level == "DEBUG"
        assert settings.workers == 4
        assert settings.metrics_port == 9100
        assert settings.otlp_endpoint == "localhost:4317"
        assert settings.out == "/tmp/runs"

    def test_invalid_log_level(self, monkeypatch):
        """Test unknown levels raise SettingsError"""
        monkeypatch.setenv("SUNKCOST_LOG_LEVEL", "LOUD")
        with pytest.raises(SettingsError):
            Settings()

    def test_zero_workers_rejected(self, monkeypatch):
        """Test workers must be at least 1"""
        monkeypatch.setenv("SUNKCOST_WORKERS", "0")
        with pytest.raises(SettingsError):
            Settings()

    def test_non_integer_workers_rejected(self, monkeypatch):
        """Test a non-numeric worker count raises"""
        monkeypatch.setenv("SUNKCOST_WORKERS", "many")
        with pytest.raises(SettingsError):
            Settings()

    def test_port_out_of_range(self):
        """Test metrics ports must be valid TCP ports"""
        with pytest.raises(SettingsError):
            Settings(metrics_port=70000)

    def test_blank_out_rejected(self):
        """Test an explicit blank output path is invalid"""
        with pytest.raises(SettingsError):
            Settings(out="  ")
