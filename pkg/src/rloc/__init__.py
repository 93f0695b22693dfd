"""Telco localization with sequence-based flaw detection and repair."""

__version__ = "0.1.0"
