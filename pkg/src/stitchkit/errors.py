"""Exception types shared across the package."""


class StitchError(Exception):
    """Base class for every error raised by stitchkit."""


class DimensionMismatch(StitchError, ValueError):
    pass


class IndexOutOfRange(StitchError, IndexError):
    pass


class DegreeOverflow(StitchError, OverflowError):
    """A result would exceed the configured mode or degree caps."""


class NotClosed(StitchError, ValueError):
    pass


class NotIntegral(StitchError, ValueError):
    pass


class NotConstant(StitchError, ValueError):
    pass


class OrderOutOfRange(StitchError, IndexError):
    pass


class OrderMismatch(StitchError, ValueError):
    pass


class NewtonDivergence(StitchError, ArithmeticError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DomainTooLarge(StitchError, ValueError):
    pass


class FlowDivergence(StitchError, ArithmeticError):
    pass


class DriftExceeded(StitchError, ArithmeticError):
    pass


class ReturnSearchFailed(StitchError, ArithmeticError):
    pass


class ContinuationLost(StitchError, ArithmeticError):
    pass


class UndefinedAtPoint(StitchError, ValueError):
    pass


class SingularPoint(StitchError, ValueError):
    pass


class UnknownName(StitchError, KeyError):
    pass


class FormatError(StitchError, ValueError):
    """A sequence or germ file is malformed or uses an unknown convention."""
