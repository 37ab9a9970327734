"""Cascading failures in DC power networks with heavy-tailed demand."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
