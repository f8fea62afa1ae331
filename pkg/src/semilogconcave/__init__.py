"""Simulation and verification tools for semi log-concave diffusions."""

__version__ = "0.1.0"
