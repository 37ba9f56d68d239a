"""Monitored continuous-time quantum-walk search with conditional resetting."""

__version__ = "0.1.0"
