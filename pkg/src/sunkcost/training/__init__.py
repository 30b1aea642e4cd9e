"""Initialization, schedulers, optimizers and the training loop."""
