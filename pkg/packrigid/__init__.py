"""Convex body packing construction and rigidity analysis."""

__version__ = "0.1.0"
