"""Numerical laboratory for the rank obstruction to approximate diagonals in B(l_p)."""

__version__ = "0.1.0"
