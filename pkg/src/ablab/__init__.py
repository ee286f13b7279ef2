"""Numerical laboratory for Aharonov-Bohm phases and flux quantization."""

__version__ = "0.1.0"
