"""Adaptive fuzzy sliding-mode control of a chaotic driven pendulum."""

__version__ = "0.1.0"
