"""Spectral difference discretization and optimized low-storage Runge-Kutta schemes."""

__version__ = "0.1.0"
