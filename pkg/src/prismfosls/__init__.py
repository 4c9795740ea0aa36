"""Adaptive space-time least-squares solver for the heat equation on
prismatic partitions of the time-space cylinder."""

__version__ = "0.1.0"
