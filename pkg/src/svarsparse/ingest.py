"""Price-panel ingestion: CSV -> validated panel -> log-returns -> windows.

The input CSV has a ``date`` column followed by one column per ticker, one
row per date, prices strictly positive, dates strictly increasing, no blanks.
Returns are ``log(next_price / price)`` per ticker; a long single series is
then cut into non-overlapping fixed-length windows with any trailing
remainder dropped.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .core import TimeSeriesTensor


class IngestError(ValueError):
    """Malformed price input."""


class MissingCell(IngestError):
    def __init__(self, line: int, column: str):
        super().__init__(f"missing cell at line {line}, column {column!r}")
        self.line = line
        self.column = column


class NonPositivePrice(IngestError):
    def __init__(self, line: int, column: str, value: float):
        super().__init__(f"non-positive price {value!r} at line {line}, column {column!r}")
        self.line = line
        self.column = column
        self.value = value


class UnsortedDates(IngestError):
    def __init__(self, line: int, previous: str, current: str):
        super().__init__(
            f"dates must be strictly increasing; line {line} has {current!r} after {previous!r}"
        )
        self.line = line


class WindowTooLong(ValueError):
    """Requested window exceeds the available number of steps."""


@dataclass(frozen=True)
class PricePanel:
    """Closing prices: ``len(dates) x len(tickers)``, strictly positive."""

    tickers: tuple[str, ...]
    dates: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.dates), len(self.tickers)):
            raise ValueError(
                f"values shape {values.shape} inconsistent with "
                f"{len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
            raise IngestError("prices must be finite and strictly positive")
        parsed = [date.fromisoformat(s) for s in self.dates]
        for i in range(1, len(parsed)):
            if parsed[i] <= parsed[i - 1]:
                raise UnsortedDates(i + 1, self.dates[i - 1], self.dates[i])
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_tickers(self) -> int:
        return self.values.shape[1]


def load_price_csv(path: str | Path) -> PricePanel:
    """Parse and validate a price CSV; errors name the offending line and column."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path} is empty") from None
        if not header or header[0].strip().lower() != "date":
            raise IngestError(f"{path}: first column header must be 'date'")
        tickers = [h.strip() for h in header[1:]]
        if not tickers or any(t == "" for t in tickers):
            raise IngestError(f"{path}: every ticker column needs a non-empty header")

        dates: list[str] = []
        parsed_dates: list[date] = []
        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) < len(header):
                column = header[len(row)] if len(row) < len(header) else "?"
                raise MissingCell(line_no, column.strip())
            if len(row) > len(header):
                raise IngestError(f"{path}: line {line_no} has {len(row)} cells, expected {len(header)}")
            date_cell = row[0].strip()
            if date_cell == "":
                raise MissingCell(line_no, "date")
            try:
                parsed = date.fromisoformat(date_cell)
            except ValueError:
                raise IngestError(f"{path}: line {line_no} date {date_cell!r} is not ISO-8601") from None
            if parsed_dates and parsed <= parsed_dates[-1]:
                raise UnsortedDates(line_no, dates[-1], date_cell)
            prices = []
            for j, cell in enumerate(row[1:]):
                cell = cell.strip()
                if cell == "":
                    raise MissingCell(line_no, tickers[j])
                try:
                    value = float(cell)
                except ValueError:
                    raise IngestError(
                        f"{path}: line {line_no}, column {tickers[j]!r}: {cell!r} is not a number"
                    ) from None
                if not math.isfinite(value) or value <= 0.0:
                    raise NonPositivePrice(line_no, tickers[j], value)
                prices.append(value)
            dates.append(date_cell)
            parsed_dates.append(parsed)
            rows.append(prices)
    if not rows:
        raise IngestError(f"{path}: no data rows")
    return PricePanel(tuple(tickers), tuple(dates), np.asarray(rows))


def log_returns(panel: PricePanel, standardize: bool = False) -> TimeSeriesTensor:
    """Per-ticker log price ratios as a one-sample tensor of length T-1.

    With ``standardize`` each ticker's return series is centered and scaled
    to unit standard deviation (columns with zero spread are only centered).
    """
    if panel.n_steps < 2:
        raise ValueError("need at least two price rows to form returns")
    returns = np.log(panel.values[1:, :] / panel.values[:-1, :])
    if standardize:
        mean = returns.mean(axis=0)
        std = returns.std(axis=0)
        returns = returns - mean
        nonzero = std > 0
        returns[:, nonzero] = returns[:, nonzero] / std[nonzero]
    return TimeSeriesTensor.from_matrix(returns)


def windowize(x: TimeSeriesTensor, window: int) -> TimeSeriesTensor:
    """Cut a single long series into consecutive non-overlapping windows.

    Output shape is ``floor(T / window) x window x d``; the trailing
    remainder of fewer than ``window`` steps is dropped.
    """
    if x.n_samples != 1:
        raise ValueError(f"expected a single-sample tensor, got {x.n_samples} samples")
    if window < 1:
        raise ValueError("window length must be at least 1")
    t, d = x.n_steps, x.n_vars
    n_windows = t // window
    if n_windows == 0:
        raise WindowTooLong(f"window {window} exceeds the {t} available steps")
    body = x.values[0, : n_windows * window, :]
    return TimeSeriesTensor(body.reshape(n_windows, window, d))
