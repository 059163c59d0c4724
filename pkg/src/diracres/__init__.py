"""Numerical laboratory for resonances of semiclassical Dirac operators near sup v + 1."""

__version__ = "0.1.0"
