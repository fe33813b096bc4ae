"""Surrogate-based mill throughput optimisation toolkit."""

__version__ = "1.0.0"
