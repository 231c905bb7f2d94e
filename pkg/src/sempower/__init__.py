"""Perception-constrained power allocation for multi-stream semantic links."""

__version__ = "0.1.0"
