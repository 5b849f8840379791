"""Interference of partially distinguishable photons in linear optics."""

__version__ = "0.1.0"
