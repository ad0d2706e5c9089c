"""Forecast how many vehicles make their first daily departure in each interval of a morning window."""

__version__ = "0.1.0"

__all__ = ["__version__"]
