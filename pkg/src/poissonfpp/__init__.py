"""Geodesics and scaling experiments for planar first-passage percolation in a Poisson field."""

__version__ = "0.1.0"
