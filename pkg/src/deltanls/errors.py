"""Exception types shared across the package.

Each maps onto a CLI exit code (see ``cli.EXIT_CODES``).
"""


class DeltaNLSError(Exception):
    """Base class for all package errors."""


class DomainError(DeltaNLSError):
    """Requested object does not exist for these parameters (e.g. omega <= gamma^2/4)."""


class SpecMismatch(DeltaNLSError):
    """Inputs live on incompatible grids or violate a structural precondition."""


class NonFinite(DeltaNLSError):
    """A sampled or evolved value is NaN or infinite."""


class SolverFailure(DeltaNLSError):
    """The banded linear solve reported a failure."""


class MassTooSmall(DeltaNLSError):
    """Mass lies below 2 M(Q_{gamma^2/4,0}); outside the low-frequency regime."""


class PreconditionError(DeltaNLSError):
    """An operation's mathematical hypothesis does not hold for the input."""


class NoConvergence(DeltaNLSError):
    """An iterative solve did not converge."""


class DomainViolation(DeltaNLSError):
    """The modulation solve left its admissible parameter region."""


class NoBranch(DeltaNLSError):
    """No threshold branch with the requested virial sign could be constructed."""


class InsufficientSamples(DeltaNLSError):
    """Too few trajectory samples for the requested finite-difference check."""
