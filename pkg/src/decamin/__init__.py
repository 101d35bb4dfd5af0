"""Building-level 10-minute walkable accessibility analytics."""

__version__ = "0.1.0"
