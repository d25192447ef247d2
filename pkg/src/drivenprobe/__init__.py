"""Thermometry with a parametrically driven Brownian probe in its limit cycle."""

__version__ = "0.1.0"
