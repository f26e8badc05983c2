"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: config problems exit 2,
numerical failures exit 3, budget violations exit 4.
"""


class SpinbathError(Exception):
    """Base class for all package errors."""


class ConfigError(SpinbathError):
    """Invalid run configuration or config file."""


class ShapeError(SpinbathError):
    """Topology cannot be built for the requested spin count."""


class DimensionMismatch(SpinbathError):
    """Operator and state dimensions disagree."""


class BudgetError(SpinbathError):
    """Request exceeds a dense-diagonalization or memory budget."""


class NumericalError(SpinbathError):
    """A numerical contract was violated (norm, trace, PSD, ...)."""


class SpectralBoundsError(NumericalError):
    """Chebyshev step detected norm growth: bounds do not enclose the spectrum."""


class GroundStateError(NumericalError):
    """Ground-state solver failed to converge; carries diagnostics."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class FitError(NumericalError):
    """Least-squares fit failed; carries diagnostics."""

    def __init__(self, message, iterations=None, cost=None):
        super().__init__(message)
        self.iterations = iterations
        self.cost = cost


class CoverageError(NumericalError):
    """Spectrum grid does not cover the spectral support."""
