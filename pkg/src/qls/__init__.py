"""Quantum linear-nearest-neighbor stack."""

__version__ = "0.1.0"
