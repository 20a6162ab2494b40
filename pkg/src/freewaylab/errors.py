"""Exception hierarchy shared across the library.

The CLI maps these onto process exit codes, so solver code should raise
the most specific class that applies.
"""


class FreewaylabError(Exception):
    """Base class for all library errors."""


class DomainError(FreewaylabError):
    """Input outside the mathematical domain of an operation."""


class PreconditionError(FreewaylabError):
    """A documented precondition of an operation was violated."""


class ExistenceError(FreewaylabError):
    """The requested object (orbit, root, homoclinic) does not exist."""


class NoConvergenceError(FreewaylabError):
    """Iterative solver failed to converge.

    Carries the last residual norm for diagnostics.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalError(FreewaylabError):
    """Quadrature or linear-algebra breakdown."""


class DegeneratePairingError(FreewaylabError):
    """An inner product required in a denominator is numerically zero."""


class ConfigError(FreewaylabError):
    """Invalid or unparseable run configuration."""
