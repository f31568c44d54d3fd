"""Belief-aware crowd navigation under a limited field of view."""

__version__ = "0.1.0"
