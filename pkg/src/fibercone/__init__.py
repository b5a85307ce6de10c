"""Folded mapping tori of graph maps."""

__version__ = "0.1.0"
