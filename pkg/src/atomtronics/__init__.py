"""Simulation and analysis toolkit for painted-potential atomtronic circuits."""

from .core import (
    AtomtronicsError,
    ConfigurationError,
    ConvergenceError,
    DensityMap,
    EnergyValue,
    FormatError,
    Grid2D,
    InvalidInputError,
    PotentialMap,
    SamplingError,
)

__version__ = "0.1.0"

__all__ = [
    "AtomtronicsError", "ConfigurationError", "ConvergenceError", "DensityMap", "EnergyValue",
    "FormatError", "Grid2D", "InvalidInputError", "PotentialMap", "SamplingError", "__version__",
]
