"""Exception types raised by the package."""


class InterfaceError(Exception):
    """Base class for all package errors."""


class ConfigError(InterfaceError, ValueError):
    """Malformed or physically invalid configuration."""


class PoleError(InterfaceError, ValueError):
    """A resolvent denominator vanishes (on-resonance detuning)."""

    def __init__(self, level, value, tol):
        self.level = level
        self.value = value
        super().__init__(
            f"on-resonance: level {level} has energy {value:.3g} MHz (|E| < {tol:g} MHz)"
        )


class PerturbativeCeilingError(InterfaceError, ValueError):
    """Field amplitude exceeds the perturbative ceiling."""


class DegeneracyError(InterfaceError):
    """Exact eigenvectors cannot be unambiguously assigned to the ground manifold."""


class DecompositionError(InterfaceError):
    """The effective Hamiltonian is not reproduced by the tensor ansatz."""


class MixedRegimeError(InterfaceError, ValueError):
    """A scaling fit range straddles the linear/nonlinear crossover."""
