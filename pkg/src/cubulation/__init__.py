"""Decide coarse-median and cubulation status of tubular and free-by-cyclic groups."""

__version__ = "0.1.0"
