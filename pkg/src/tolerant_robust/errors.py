"""Exception types raised across the package."""


class TolerantError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(TolerantError, ValueError):
    pass


class InvalidPointError(InvalidArgumentError):
    pass


class InvalidRadiusError(InvalidArgumentError):
    pass


class InvalidSpaceError(InvalidArgumentError):
    """A finite space whose distances or weights violate the metric/measure axioms."""


class EmptySupportError(TolerantError):
    """A ball in a finite space that contains no point of positive weight."""


class NonRealizableError(TolerantError):
    """No hypothesis of the family is consistent (or robustly consistent) with a sample."""


class UnsupportedFamilyError(TolerantError):
    pass


class UnsupportedModeError(TolerantError):
    """An evaluation mode that cannot be applied to the given hypothesis/space pair."""


class WeakLearnerFailure(TolerantError):
    pass


class CompressionFailure(TolerantError):
    pass


class ParseError(TolerantError, ValueError):
    pass
