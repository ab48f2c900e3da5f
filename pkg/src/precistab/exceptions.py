"""Exception hierarchy.

Every error raised on purpose by this package derives from
:class:`PrecistabError`, which carries a CLI exit code.
"""


class PrecistabError(Exception):
    exit_code = 3


class DataError(PrecistabError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class NumericalError(PrecistabError, ArithmeticError):
    """A numerical routine could not produce a certified result."""

    exit_code = 4


class NotPositiveDefinite(NumericalError):
    pass


class NotPSD(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ShapeMismatch(DataError):
    pass


class SizeMismatch(DataError):
    pass


class KindMismatch(DataError):
    pass


class TooShort(DataError):
    pass


class EmptyInput(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.line = line
        self.column = column


class InvalidProblem(DataError):
    pass


class KappaTooSmall(InvalidProblem):
    pass


class PreconditionViolated(DataError):
    pass


class Infeasible(DataError):
    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class DimensionTooLarge(DataError):
    pass


class InvalidConstants(DataError):
    pass


class DegenerateMu(DataError):
    pass


class ZeroSigma(DataError):
    pass


class WeightMismatch(DataError):
    pass


class AdmissibilityViolated(DataError):
    pass


class ConfigInvalid(DataError):
    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
