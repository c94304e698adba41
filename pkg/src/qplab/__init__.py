"""Finite-volume numerics for quasi-periodic Schrödinger operators."""

__version__ = "0.1.0"
