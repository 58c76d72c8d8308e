"""Dual control barrier functions for STL task sequencing on single integrators."""

__version__ = "0.1.0"
