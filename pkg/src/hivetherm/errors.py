"""Exception types raised across the package."""


class HiveThermError(Exception):
    """Base class for all package errors."""


class InvalidSeries(HiveThermError, ValueError):
    pass


class InvalidDataset(HiveThermError, ValueError):
    pass


class TreatedPeriFullyMissing(HiveThermError):
    """A treated hive has no peripheral readings at all."""


class NumericalOverflow(HiveThermError, ArithmeticError):
    """The integrated core temperature left the representable range."""


class EmptySegment(HiveThermError):
    pass


class TooFewObservations(HiveThermError):
    pass


class NoConvergence(HiveThermError):
    """No multistart seed beat the constant-predictor sanity bound."""


class AllDegenerate(HiveThermError):
    pass


class InsufficientDays(HiveThermError):
    pass


class HorizonForcingMissing(HiveThermError):
    pass


class NoOverlap(HiveThermError):
    pass


class InsufficientHistory(HiveThermError):
    pass


class ParseError(HiveThermError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class MisalignedSensors(HiveThermError):
    pass


class ZeroVarianceWarning(UserWarning):
    """Residuals are identically zero; the Gaussian likelihood is unbounded."""


class DegradedInputWarning(UserWarning):
    pass
