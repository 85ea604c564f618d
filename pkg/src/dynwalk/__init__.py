"""Simulation and exact references for the dynamical simple random walk on Z^2."""

__version__ = "0.1.0"
