"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A record, file, or argument violates a documented invariant."""


class InvalidInputError(ValidationError):
    """An operation precondition was not met."""


class ShapeError(ValidationError):
    """Array dimensions are incompatible with the operation."""


class FormatError(ValidationError):
    """A file's contents do not match the documented format."""


class DomainError(ValidationError):
    """A numeric argument lies outside the operation's mathematical domain."""


class NumericError(RuntimeError):
    """A computation produced a non-finite value where a finite one is required."""
