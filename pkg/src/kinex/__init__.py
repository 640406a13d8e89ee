"""Kinetic wealth-exchange simulation and inequality/savings panel analytics."""

__version__ = "0.1.0"
