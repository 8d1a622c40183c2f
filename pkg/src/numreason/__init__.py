"""Weakly supervised neuro-symbolic numerical reasoning over text."""

__version__ = "0.1.0"
