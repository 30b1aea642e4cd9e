"""sunkcost: continuous training of small classifiers and what it saves over retraining."""

__version__ = "0.1.0"
