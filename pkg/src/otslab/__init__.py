"""Simulation laboratory for one-time signatures over ideal oracles and their generic forgers."""

__version__ = "0.1.0"
