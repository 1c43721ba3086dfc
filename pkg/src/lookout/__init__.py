"""Egocentric 6D head-pose trajectory forecasting toolkit."""

__version__ = "0.1.0"
