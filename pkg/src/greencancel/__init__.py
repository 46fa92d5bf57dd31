"""Symbolic cancellation identities for Green function comparison, with an
exact rational solver and a numerical random-matrix companion."""

__version__ = "0.1.0"
