"""Spectral numerics for singular finite-gap periodic Schrodinger operators."""

from ._core import BACKEND as kernel_backend

__version__ = "0.1.0"
__all__ = ["kernel_backend", "__version__"]
