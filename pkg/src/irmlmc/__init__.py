"""Irregular-grid Euler schemes, two-level error limits and multilevel Monte Carlo."""

__version__ = "0.1.0"
