"""Synthetic datasets, splits, domain shift and CSV I/O."""
