"""Random walks on dynamical percolation of the complete graph."""

from .params import Params

__version__ = "0.1.0"

__all__ = ["Params", "__version__"]
