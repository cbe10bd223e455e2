"""Interval prediction and explanation of activity processing times from event logs."""

__version__ = "0.1.0"
