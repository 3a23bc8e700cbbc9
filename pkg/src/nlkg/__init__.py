"""Even solutions of the focusing 1D nonlinear Klein-Gordon equation near the ground state."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
