"""Statevector VQE with sequentially generated circuit ansatz."""

__version__ = "0.1.0"
