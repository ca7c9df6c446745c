"""Steady-state learning in signalling games."""

__version__ = "0.1.0"
