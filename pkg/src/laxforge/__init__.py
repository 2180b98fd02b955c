"""Symbolic-numeric verification of a non-isospectral 2+1 Lax pair, its
point symmetries and its similarity reductions."""

__version__ = "0.1.0"
