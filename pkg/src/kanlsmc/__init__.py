"""LSMC pricing of American-style options with learnable continuation models."""

from .accel import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
