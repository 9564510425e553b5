"""Numerical verification of uniform expansion for random surface dynamics."""

__version__ = "0.1.0"
