"""Scenario, sequence and sweep runners, persistence, reports and the CLI."""
