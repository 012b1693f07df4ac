"""Simulation and inference lab for differences-in-differences under spatially correlated shocks."""

__version__ = "0.1.0"
