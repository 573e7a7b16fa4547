"""Numerical laboratory for the I-method on the periodic cubic Schrodinger equation."""

__version__ = "0.1.0"
