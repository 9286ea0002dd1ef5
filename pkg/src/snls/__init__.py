"""Pseudo-spectral simulation and verification tools for the stochastic NLS with conservative noise."""

__version__ = "0.1.0"
