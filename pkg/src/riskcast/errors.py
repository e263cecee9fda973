"""Exception hierarchy shared by all riskcast modules.

Data-quality problems (bad CSV rows, short samples, misaligned series)
and numerical problems (optimizer failures, degenerate inputs) are kept
in separate branches so the CLI can map them to distinct exit codes.
"""

from __future__ import annotations


class RiskcastError(Exception):
    """Base class for every error raised by this package."""


class DataError(RiskcastError):
    """Invalid or insufficient input data."""


class NumericalError(RiskcastError):
    """A numerical routine could not produce a valid result."""


# -- data errors -------------------------------------------------------------

class ParseError(DataError):
    """Malformed CSV field or non-positive price."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class OrderError(DataError):
    """Dates not strictly increasing."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class InsufficientData(DataError):
    """Sample too short for the requested operation."""


class AlignmentError(DataError):
    """Sequences that must share a length do not."""


class DomainError(DataError):
    """Argument outside the mathematical domain of the operation."""


class InsufficientTail(DataError):
    """Too few exceedances above the threshold to fit a tail model."""


class EmptyResiduals(DataError):
    """No exceedance residuals: the test is not applicable."""


class NotApplicable(DataError):
    """Measure undefined for this input (for example no violations)."""


# -- numerical errors --------------------------------------------------------

class FitError(NumericalError):
    """Optimizer did not converge.

    Carries the best iterate found so callers can decide whether to use
    it anyway (the rolling driver does, flagging the record).
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
        self.converged = False


class TailError(NumericalError):
    """Requested tail probability outside the modeled tail."""


class TailMeanUndefined(NumericalError):
    """GPD tail mean does not exist (shape >= 1)."""


class DegenerateWeights(NumericalError):
    """All regression weights are zero (or underflowed)."""


class SingularDesign(NumericalError):
    """Design matrix is rank deficient."""


class DegenerateBandwidth(NumericalError):
    """No usable bandwidth can be derived from the data."""


class DegenerateResiduals(NumericalError):
    """Residuals have zero spread; the studentized statistic is undefined."""


class ForecastError(NumericalError):
    """A one-step forecast could not be evaluated (e.g. negative radicand)."""
