"""Sharp Hardy inequality for the free Dirac operator and related spectral checks."""

__version__ = "0.1.0"

from .core import Channel, PhysicalParams, RadialGrid, ValidationError, dirac_matrices, log_grid
from .hardy import Attainer, hardy_functionals, verify_sharpness
from .spectrum import solve_channel

__all__ = [
    "Attainer",
    "Channel",
    "PhysicalParams",
    "RadialGrid",
    "ValidationError",
    "dirac_matrices",
    "hardy_functionals",
    "log_grid",
    "solve_channel",
    "verify_sharpness",
]
