"""Exception types shared across the package."""


class TomographyError(ValueError):
    """Base class for all validation and contract failures."""


class InvalidDimensionError(TomographyError):
    """A dimension or size argument is out of range."""


class InvalidRankError(TomographyError):
    """A requested rank is not in [1, d]."""


class ContractViolationError(TomographyError):
    """An input violates a documented precondition (ordering, shape, ...)."""


class NormalizationError(TomographyError):
    """A vector or matrix fails its normalization invariant."""


class StateValidityError(TomographyError):
    """A matrix is too far from a valid quantum state to be used."""


class NotInformationallyCompleteError(TomographyError):
    """The measurement design does not determine the state uniquely."""


class DomainError(TomographyError):
    """Arguments are outside the mathematical domain of the operation."""
