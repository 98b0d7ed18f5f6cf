"""Geometrically enlarged certificates for Gaussian-smoothed classifiers."""

__version__ = "0.1.0"
