"""Compositional verification of approximate initial-state opacity for networks of switched systems."""

__version__ = "0.1.0"
