"""Incremental feature extraction for recorded music performances."""

__version__ = "0.1.0"
