"""Flexibility assessment of economic dispatch coupled with dynamic AGC."""

__version__ = "0.1.0"
