"""Nonlinear atom-light effective Hamiltonian of the 87Rb D2 line and J_Z metrology."""

from . import angular, atomic, klein, metrology, tensors
from .errors import (
    ConfigError,
    DecompositionError,
    DegeneracyError,
    InterfaceError,
    MixedRegimeError,
    PerturbativeCeilingError,
    PoleError,
)

__version__ = "0.1.0"

__all__ = [
    "angular",
    "atomic",
    "klein",
    "metrology",
    "tensors",
    "ConfigError",
    "DecompositionError",
    "DegeneracyError",
    "InterfaceError",
    "MixedRegimeError",
    "PerturbativeCeilingError",
    "PoleError",
]
