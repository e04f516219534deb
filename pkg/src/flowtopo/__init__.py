"""Topological analysis of optical-flow patch statistics."""

__version__ = "0.1.0"
