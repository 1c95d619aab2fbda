"""Exception types raised across the package."""


class SpaceMismatchError(ValueError):
    """Two objects were expected to live on the same inner-product space."""


class InvalidSpaceError(ValueError):
    """A Gram matrix is not symmetric positive definite."""


class ChainInconsistencyError(ValueError):
    """Maps of a complex do not chain (domain/codomain dimensions disagree)."""


class CohomologyMismatchError(RuntimeError):
    """The two independent cohomology computations disagree."""


class TheoremViolationError(RuntimeError):
    """Complex property and annihilation property disagree.

    Mathematically the two are equivalent, so this always signals a bug.
    """


class CertificateViolationError(RuntimeError):
    """An operator failed a structural check it was required to pass."""


class SingularSystemError(RuntimeError):
    """A shifted step system turned out to be singular."""
