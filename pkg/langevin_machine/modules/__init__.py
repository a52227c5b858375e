"""Langevin machine sampling library."""

__version__ = "0.1.0"
