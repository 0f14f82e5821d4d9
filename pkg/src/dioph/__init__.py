"""Simultaneous approximation exponents, 3-systems and their constructions."""

__version__ = "0.1.0"
