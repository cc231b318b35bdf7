"""Exception types raised across the package."""


class ArwError(Exception):
    """Base class for all caller-visible failures."""


class NotSumOfTwoSquares(ArwError, ValueError):
    """The energy index has no representation as a sum of two squares."""

    def __init__(self, n):
        super().__init__(f"n={n} is not a sum of two squares (the frequency set is empty)")
        self.n = n


class ResolutionTooLow(ArwError, ValueError):
    pass


class UnknownFrequency(ArwError, KeyError):
    pass


class DegenerateSpectrum(ArwError, ValueError):
    """Raised when 1 +/- mu4 vanishes and the Cholesky factor loses rank."""


class UnresolvedCriticalCell(ArwError, RuntimeError):
    pass


class InsufficientData(ArwError, ValueError):
    pass


class SchemaMismatch(ArwError, ValueError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column
