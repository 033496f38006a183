"""Sobol sensitivity analysis with low-rank tensor approximations and polynomial chaos."""

__version__ = "0.1.0"
