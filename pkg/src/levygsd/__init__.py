"""Numerical tools for non-local Schrodinger operators driven by jump Levy processes."""

__version__ = "0.1.0"
