"""Numerical laboratory for Fourier restriction to the surface xi3 = xi1^4 + xi2^4."""

__version__ = "0.1.0"
