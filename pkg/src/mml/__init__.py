"""Simulation of qubit storage in noisy Kitaev chains via fermionic Gaussian states."""

__version__ = "0.1.0"
