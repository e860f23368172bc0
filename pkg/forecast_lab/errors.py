"""
Error and warning types
Each error family maps to a command-line exit code
"""

from .config import EXIT_CODES


class ForecastLabError(Exception):
    """Base class for all lab failures"""
    exit_code = 1


# Config ----------------------------------------------------------------------

class ConfigError(ForecastLabError, ValueError):
    exit_code = EXIT_CODES['config']


# Data ------------------------------------------------------------------------

class DataError(ForecastLabError, ValueError):
    exit_code = EXIT_CODES['data']


class TransformDomainError(DataError):
    def __init__(self, column, date, value, code):
        self.column = column
        self.date = date
        self.value = value
        self.code = code
        super().__init__(
            f"Transform code {code} needs positive values; column '{column}' "
            f"has {value!r} at {date}"
        )


class EmptyDesignError(DataError):
    pass


class InsufficientHistoryError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class CatalogError(DataError):
    pass


class DuplicateIdError(CatalogError):
    pass


class DateGapError(DataError):
    pass


class EmptyOriginSetError(DataError):
    pass


class MissingBaselineError(DataError):
    pass


class AlignmentError(DataError):
    pass


class NoShrinkageCellsError(DataError):
    pass


# Numerical -------------------------------------------------------------------

class NumericalError(ForecastLabError, ArithmeticError):
    exit_code = EXIT_CODES['numerical']


class NumericalSingularityError(NumericalError):
    pass


class SingularDesignError(NumericalError):
    pass


class SweepError(NumericalError):
    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"Non-finite value in Gibbs step '{step}'")


class ZeroVarianceError(NumericalError):
    pass


class NonPsdCovarianceError(NumericalError):
    pass


class ExcessiveFailuresError(NumericalError):
    pass


# IO --------------------------------------------------------------------------

class StoreIOError(ForecastLabError, OSError):
    exit_code = EXIT_CODES['io']


class CorruptStoreError(StoreIOError):
    pass


class StoreVersionError(StoreIOError):
    pass


# Warnings --------------------------------------------------------------------

class ForecastLabWarning(UserWarning):
    pass


class NonStationaryWarning(ForecastLabWarning):
    pass


class DegenerateDensityWarning(ForecastLabWarning):
    pass


class TopKTruncatedWarning(ForecastLabWarning):
    pass


class UniverseMismatchWarning(ForecastLabWarning):
    pass


class ConfigHashMismatchWarning(ForecastLabWarning):
    pass


class LowDegreesOfFreedomWarning(ForecastLabWarning):
    pass
