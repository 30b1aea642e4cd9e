"""Pydantic schemas for configs, plans and persisted records."""
