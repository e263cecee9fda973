"""Price ingestion, log losses, rolling windows and descriptive stats.

The input format is deliberately narrow: a two-column CSV ``date,close``
with ISO dates in strictly increasing order and positive closes. Files
with extra columns are rejected rather than guessed at. Dates are
carried along as opaque ordered labels; nothing downstream needs a
trading calendar.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import date as _date
from typing import Iterable, Iterator

import numpy as np

from .errors import InsufficientData, OrderError, ParseError

__all__ = [
    "PriceSeries",
    "LogLossSeries",
    "Window",
    "SummaryStats",
    "parse_price_csv",
    "log_losses",
    "summary_stats",
    "rolling_windows",
]


@dataclass(frozen=True)
class PriceSeries:
    """Daily closing prices with strictly increasing dates."""

    dates: tuple[str, ...]
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "prices", np.asarray(self.prices, dtype=float))
        if len(self.dates) != len(self.prices):
            raise ParseError("dates and prices must have equal length")
        if len(self.prices) < 2:
            raise InsufficientData("need at least two prices")
        if not np.all(np.isfinite(self.prices)) or np.any(self.prices <= 0.0):
            raise ParseError("prices must be positive and finite")
        if any(self.dates[i] >= self.dates[i + 1] for i in range(len(self.dates) - 1)):
            raise OrderError("dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.prices)


@dataclass(frozen=True)
class LogLossSeries:
    """Negated log returns; positive values are losses."""

    dates: tuple[str, ...]
    losses: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "losses", np.asarray(self.losses, dtype=float))
        if len(self.dates) != len(self.losses):
            raise ParseError("dates and losses must have equal length")
        if not np.all(np.isfinite(self.losses)):
            raise ParseError("losses must be finite")

    def __len__(self) -> int:
        return len(self.losses)


@dataclass(frozen=True)
class Window:
    """Contiguous slice of a loss series used to forecast its target.

    ``values`` covers indices [start, start + W); the forecast target is
    index ``start + W`` of the parent series.
    """

    start: int
    values: np.ndarray

    @property
    def target(self) -> int:
        return self.start + len(self.values)


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    sd: float
    skewness: float
    excess_kurtosis: float
    min: float
    max: float


def parse_price_csv(text: str | Iterable[str]) -> PriceSeries:
    """Parse a ``date,close`` CSV into a :class:`PriceSeries`.

    Row numbers in error messages are 1-based file lines (the header is
    line 1). Rows are kept in file order; ordering violations raise
    rather than being silently sorted.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input", row=1) from None
    if [h.strip().lower() for h in header] != ["date", "close"]:
        raise ParseError(f"expected header 'date,close', got {','.join(header)!r}", row=1)

    dates: list[str] = []
    prices: list[float] = []
    prev: _date | None = None
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", row=lineno)
        raw_date, raw_close = row[0].strip(), row[1].strip()
        try:
            parsed = _date.fromisoformat(raw_date)
        except ValueError:
            raise ParseError(f"bad ISO date {raw_date!r}", row=lineno) from None
        try:
            close = float(raw_close)
        except ValueError:
            raise ParseError(f"bad close {raw_close!r}", row=lineno) from None
        if not math.isfinite(close) or close <= 0.0:
            raise ParseError(f"close must be positive, got {raw_close}", row=lineno)
        if prev is not None and parsed <= prev:
            raise OrderError(f"date {raw_date} not after previous row", row=lineno)
        prev = parsed
        dates.append(raw_date)
        prices.append(close)
    if len(prices) < 2:
        raise InsufficientData("need at least two price rows")
    return PriceSeries(tuple(dates), np.array(prices))


def log_losses(p: PriceSeries) -> LogLossSeries:
    """losses[t] = -ln(prices[t+1] / prices[t]), dated by the later day."""
    values = -np.diff(np.log(p.prices))
    return LogLossSeries(p.dates[1:], values)


def summary_stats(l: LogLossSeries | np.ndarray) -> SummaryStats:
    """Sample moments of a loss series.

    Skewness and kurtosis are the standardized central moments
    m3/m2^1.5 and m4/m2^2 - 3 (normal data gives 0 for both); a
    constant series reports them as NaN. The standard deviation uses
    the n-1 denominator.
    """
    x = np.asarray(l.losses if isinstance(l, LogLossSeries) else l, dtype=float)
    n = x.size
    if n < 2:
        raise InsufficientData("need at least two observations")
    mean = float(np.mean(x))
    d = x - mean
    m2 = float(np.mean(d * d))
    sd = float(np.std(x, ddof=1))
    if m2 == 0.0:
        skew = math.nan
        exkurt = math.nan
    else:
        skew = float(np.mean(d**3)) / m2**1.5
        exkurt = float(np.mean(d**4)) / m2**2 - 3.0
    return SummaryStats(mean, sd, skew, exkurt, float(np.min(x)), float(np.max(x)))


def rolling_windows(l: LogLossSeries | np.ndarray, w: int) -> Iterator[Window]:
    """Yield every width-``w`` window whose target index exists.

    A series of length n yields exactly n - w windows; consecutive
    windows overlap in w - 1 points.
    """
    x = np.asarray(l.losses if isinstance(l, LogLossSeries) else l, dtype=float)
    if w < 10:
        raise InsufficientData("window size must be >= 10")
    if x.size <= w:
        raise InsufficientData(f"series length {x.size} must exceed window {w}")
    for k in range(x.size - w):
        yield Window(k, x[k : k + w])
