"""Mask-conditioned chess move-selection harness."""

__version__ = "0.1.0"
