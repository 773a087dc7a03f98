"""Integrated density of states for random Schrodinger operators on periodic graphs."""

__version__ = "0.1.0"
