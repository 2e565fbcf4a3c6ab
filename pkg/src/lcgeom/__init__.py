"""Numerical toolkit for the geometry of log-concave functions."""

__version__ = "0.1.0"
