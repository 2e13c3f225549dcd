"""Boundedness criteria for weighted integral operators whose kernels split through an intermediate point."""

__version__ = "0.1.0"
