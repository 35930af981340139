"""Exception types raised across the package."""


class MelsineError(Exception):
    """Base class for all package errors."""


class InvalidArgument(MelsineError, ValueError):
    pass


class DegenerateFilterbank(MelsineError, ValueError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"mel filter {index} has no FFT bin support")


class CalibrationFailure(MelsineError, ArithmeticError):
    pass


class DegenerateCandidate(MelsineError, ArithmeticError):
    pass


class NumericFailure(MelsineError, ArithmeticError):
    pass


class UnsupportedFormat(MelsineError):
    pass


class ParseError(MelsineError):
    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
