"""Pseudo-spectral laboratory for the water-waves equations in the rigid-lid scaling."""

__version__ = "0.1.0"
