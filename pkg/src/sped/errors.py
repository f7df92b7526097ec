"""Exception vocabulary shared by every module.

The class names double as the structured error names printed by the CLI,
so renaming one is a breaking change.
"""


class SpedError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 3

    @property
    def name(self):
        return type(self).__name__


class InvalidParameter(SpedError, ValueError):
    pass


class BadResolution(InvalidParameter):
    pass


class BadDimensions(InvalidParameter):
    pass


class IndexOutOfRange(InvalidParameter, IndexError):
    pass


class GridMismatch(InvalidParameter):
    pass


class NegativeArgument(InvalidParameter):
    pass


class UnsupportedPilot(InvalidParameter):
    pass


class NonHermitianSpectrum(SpedError):
    pass


class TailTooFat(SpedError):
    pass


class ErrorCFVanishesOnBand(SpedError):
    pass


class MaximizerAtBoundary(SpedError):
    pass


class SingularSystem(SpedError):
    pass


class Infeasible(SpedError):
    exit_code = 4


class MaxIterations(SpedError):
    pass


class NoBracket(SpedError):
    pass


class NonDensityIterate(SpedError):
    pass


class ParseError(SpedError):
    """Unreadable input file or flag combination."""

    exit_code = 2
