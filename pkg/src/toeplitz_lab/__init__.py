"""Numerical laboratory for trace approximations of Toeplitz matrices and operators."""

__version__ = "0.1.0"
