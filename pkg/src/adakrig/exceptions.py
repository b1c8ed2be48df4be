"""Exception types shared across the package."""


class AdakrigError(Exception):
    """Base class for all package errors."""


class ParameterError(AdakrigError, ValueError):
    """A supplied parameter is outside its valid range."""


class InvalidDesignError(AdakrigError, ValueError):
    """A design violates a structural requirement (shape, bounds, duplicates)."""


class DuplicatePointError(InvalidDesignError):
    """A point coincides with an existing design row within tolerance."""


class IllConditionedDesignError(AdakrigError):
    """Correlation matrix could not be factorized even at the maximum jitter."""


class DegenerateTrendError(AdakrigError):
    """Trend basis carries no information (zero Gram matrix)."""


class ObjectiveError(AdakrigError):
    """An optimization objective returned a non-finite value.

    The offending input is kept on the ``x`` attribute.
    """

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class DomainError(AdakrigError, ValueError):
    """A point lies outside the domain an operation requires."""


class ConstantOutputsError(AdakrigError, ValueError):
    """Outputs have zero range, so a normalized metric is undefined."""
