"""Reachability analysis for cycle-reset stochastic hybrid systems over linear
real arithmetic."""

__version__ = "0.1.0"
