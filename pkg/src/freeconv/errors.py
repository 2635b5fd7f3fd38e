"""Exception hierarchy shared by all freeconv modules."""


class FreeConvError(Exception):
    """Base class for every error raised by freeconv."""


class NonPositiveImaginaryPart(FreeConvError, ValueError):
    """A transform was requested at a point off the open upper half-plane."""


class UnsupportedOrder(FreeConvError, ValueError):
    pass


class UnsupportedMeasure(FreeConvError, ValueError):
    pass


class InvalidParameter(FreeConvError, ValueError):
    pass


class NonFiniteValue(FreeConvError, ArithmeticError):
    """A computation produced NaN or infinity."""


class ParseError(FreeConvError, ValueError):
    """Malformed measure description.

    Attributes
    ----------
    offset : int
        Byte offset in the input where parsing failed.
    expected : str
        Description of what the parser expected at `offset`.
    """

    def __init__(self, message, offset=0, expected=""):
        super().__init__(f"{message} at offset {offset}" + (f" (expected {expected})" if expected else ""))
        self.offset = offset
        self.expected = expected


class NoConvergence(FreeConvError, RuntimeError):
    pass


class SingularJacobian(FreeConvError, ArithmeticError):
    """Newton Jacobian is numerically singular (genericity fails)."""


class NotConverged(FreeConvError, RuntimeError):
    """A solver could not certify a boundary value at the requested point."""


class ContinuationStalled(NotConverged):
    """The eta ladder could not be descended to the requested floor.

    Attributes
    ----------
    point : SubordinationPoint or None
        Last accepted point on the ladder.
    eta : float
        Imaginary part of the last accepted point.
    """

    def __init__(self, message, point=None, eta=float("nan")):
        super().__init__(message)
        self.point = point
        self.eta = eta


class NotHermitian(FreeConvError, ValueError):
    pass
