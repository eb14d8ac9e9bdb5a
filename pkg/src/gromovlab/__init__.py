"""Numerical checks of Gromov hyperbolicity for strongly pseudoconvex domains."""

__version__ = "0.1.0"
