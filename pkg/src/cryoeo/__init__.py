"""Simulation and analysis of a cryogenic electro-optic microwave readout chain."""

__version__ = "0.1.0"
