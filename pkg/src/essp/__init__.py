"""Evacuation shelter scheduling: exact and heuristic shelter allocation over time."""

__version__ = "0.1.0"
