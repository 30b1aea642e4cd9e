"""Speed, relative speed-up and per-arm aggregation."""
