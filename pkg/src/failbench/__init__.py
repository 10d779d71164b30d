"""Failure-aware method comparison harness."""

__version__ = "0.1.0"
