"""
Tick tape ingestion.

Trades are stored per calendar day with timestamps as integer microseconds
since midnight and strictly positive prices.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import warnings
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import IO

import numpy as np

__all__ = [
    "DEFAULT_CLOSE",
    "DEFAULT_OPEN",
    "DayTape",
    "TapeFormat",
    "TapeFormatError",
    "TickTape",
    "collapse_same_timestamp",
    "collapse_tape",
    "filter_session",
    "format_time",
    "from_arrays",
    "parse_session",
    "parse_tape",
    "parse_time",
    "read_tape",
    "write_tape",
]

US_PER_SECOND = 1_000_000
DEFAULT_OPEN = 9 * 3600 * US_PER_SECOND + 30 * 60 * US_PER_SECOND
DEFAULT_CLOSE = 16 * 3600 * US_PER_SECOND


class TapeFormatError(ValueError):
    """Raised for malformed tape input. ``line`` is 1-based, or None."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def parse_time(text: str) -> int:
    """Parse ``HH:MM:SS[.ffffff]`` (or ``HH:MM``) into microseconds since midnight."""
    parts = text.strip().split(":")
    if len(parts) == 2:
        parts.append("0")
    if len(parts) != 3:
        raise ValueError(f"bad time of day {text!r}")
    hh, mm, ss = parts
    if "." in ss:
        whole, frac = ss.split(".", 1)
        if not frac.isdigit() or len(frac) > 6:
            raise ValueError(f"bad fractional seconds in {text!r}")
        frac_us = int(frac.ljust(6, "0"))
    else:
        whole, frac_us = ss, 0
    if not (hh.isdigit() and mm.isdigit() and whole.isdigit()):
        raise ValueError(f"bad time of day {text!r}")
    h, m, s = int(hh), int(mm), int(whole)
    if h > 23 or m > 59 or s > 59:
        raise ValueError(f"time of day out of range {text!r}")
    return ((h * 60 + m) * 60 + s) * US_PER_SECOND + frac_us


def format_time(us: int) -> str:
    us = int(us)
    secs, frac = divmod(us, US_PER_SECOND)
    h, rem = divmod(secs, 3600)
    m, s = divmod(rem, 60)
    return f"{h:02d}:{m:02d}:{s:02d}.{frac:06d}"


def _as_us(value: int | str | dt.time) -> int:
    if isinstance(value, dt.time):
        return (
            (value.hour * 60 + value.minute) * 60 + value.second
        ) * US_PER_SECOND + value.microsecond
    if isinstance(value, str):
        return parse_time(value)
    return int(value)


def parse_session(text: str) -> tuple[int, int]:
    """Parse a ``HH:MM-HH:MM`` session string."""
    try:
        lo, hi = text.split("-")
        open_us, close_us = parse_time(lo), parse_time(hi)
    except ValueError as exc:
        raise ValueError(f"bad session {text!r}, expected HH:MM-HH:MM") from exc
    if open_us >= close_us:
        raise ValueError(f"session open must precede close: {text!r}")
    return open_us, close_us


@dataclass(frozen=True)
class DayTape:
    """One trading day of trades.

    Parameters
    ----------
    date : datetime.date
    times : ndarray of int64
        Microseconds since midnight, non-decreasing.
    prices : ndarray of float64
        Trade prices, strictly positive.
    """

    date: dt.date
    times: np.ndarray
    prices: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.int64)
        prices = np.asarray(self.prices, dtype=np.float64)
        if times.ndim != 1 or times.shape != prices.shape:
            raise ValueError("times and prices must be 1-d arrays of equal length")
        if times.size and np.any(np.diff(times) < 0):
            raise ValueError(f"{self.date}: trade times must be non-decreasing")
        if np.any(~np.isfinite(prices)) or np.any(prices <= 0):
            raise ValueError(f"{self.date}: prices must be finite and > 0")
        times.setflags(write=False)
        prices.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "prices", prices)

    @property
    def n_trades(self) -> int:
        return int(self.times.size)

    @property
    def seconds(self) -> np.ndarray:
        return self.times / US_PER_SECOND

    def is_strictly_increasing(self) -> bool:
        return bool(np.all(np.diff(self.times) > 0))


@dataclass(frozen=True)
class TickTape:
    days: tuple[DayTape, ...]
    symbol: str = "SIM"

    def __post_init__(self) -> None:
        days = tuple(self.days)
        for prev, cur in zip(days, days[1:]):
            if cur.date <= prev.date:
                raise ValueError("days must be strictly increasing by date")
        for day in days:
            if day.n_trades == 0:
                raise ValueError(f"{day.date}: empty day in tape")
        object.__setattr__(self, "days", days)

    def __len__(self) -> int:
        return len(self.days)

    def __iter__(self):
        return iter(self.days)

    @property
    def dates(self) -> list[dt.date]:
        return [d.date for d in self.days]

    @property
    def n_trades(self) -> int:
        return sum(d.n_trades for d in self.days)


@dataclass(frozen=True)
class TapeFormat:
    """Delimited text layout of a tape file.

    ``columns`` names the position of ``date``, ``time`` and ``price``; extra
    columns are ignored. ``time_digits`` is the number of fractional-second
    digits written by :func:`write_tape`.
    """

    delimiter: str = ","
    columns: tuple[str, ...] = ("date", "time", "price")
    header: bool = True
    time_digits: int = 6

    def __post_init__(self) -> None:
        missing = {"date", "time", "price"} - set(self.columns)
        if missing:
            raise ValueError(f"format lacks columns {sorted(missing)}")
        if not 0 <= self.time_digits <= 6:
            raise ValueError("time_digits must be within 0..6")


def parse_tape(
    source: IO[str] | IO[bytes] | Iterable[str],
    fmt: TapeFormat | None = None,
    symbol: str = "SIM",
) -> TickTape:
    """Parse a delimited tape into a :class:`TickTape`.

    Rows are grouped by date; within a date file order is kept and must be
    non-decreasing in time.
    """
    fmt = fmt or TapeFormat()
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)) or (
        hasattr(source, "mode") and "b" in getattr(source, "mode", "")
    ):
        source = io.TextIOWrapper(source, encoding="utf-8")  # type: ignore[arg-type]
    reader = csv.reader(source, delimiter=fmt.delimiter)
    i_date = fmt.columns.index("date")
    i_time = fmt.columns.index("time")
    i_price = fmt.columns.index("price")
    width = max(i_date, i_time, i_price) + 1

    by_date: dict[dt.date, tuple[list[int], list[float], int]] = {}
    line = 0
    n_rows = 0
    for row in reader:
        line += 1
        if line == 1 and fmt.header:
            continue
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < width:
            raise TapeFormatError(f"expected {width} columns, got {len(row)}", line)
        try:
            day = dt.date.fromisoformat(row[i_date].strip())
        except ValueError:
            raise TapeFormatError(f"bad date {row[i_date]!r}", line) from None
        try:
            t = parse_time(row[i_time])
        except ValueError as exc:
            raise TapeFormatError(str(exc), line) from None
        try:
            p = float(row[i_price])
        except ValueError:
            raise TapeFormatError(f"bad price {row[i_price]!r}", line) from None
        if not np.isfinite(p) or p <= 0:
            raise TapeFormatError(f"price must be > 0, got {row[i_price]!r}", line)
        times, prices, _ = by_date.setdefault(day, ([], [], line))
        if times and t < times[-1]:
            raise TapeFormatError(f"time {row[i_time]!r} earlier than previous trade", line)
        times.append(t)
        prices.append(p)
        n_rows += 1
    if n_rows == 0:
        raise TapeFormatError("empty tape: no trade rows")
    days = tuple(
        DayTape(d, np.array(ts, dtype=np.int64), np.array(ps, dtype=np.float64))
        for d, (ts, ps, _) in sorted(by_date.items())
    )
    return TickTape(days, symbol)


def read_tape(path, fmt: TapeFormat | None = None, symbol: str = "SIM") -> TickTape:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_tape(fh, fmt, symbol)


def write_tape(tape: TickTape, stream: IO[str], fmt: TapeFormat | None = None) -> None:
    """Write ``tape`` in canonical delimited form (round-trips via :func:`parse_tape`)."""
    fmt = fmt or TapeFormat()
    order = {"date": 0, "time": 1, "price": 2}
    cols = [c for c in fmt.columns if c in order]
    writer = csv.writer(stream, delimiter=fmt.delimiter, lineterminator="\n")
    if fmt.header:
        writer.writerow(cols)
    for day in tape.days:
        iso = day.date.isoformat()
        for t, p in zip(day.times.tolist(), day.prices.tolist()):
            stamp = format_time(t)
            if fmt.time_digits < 6:
                stamp = stamp[: 9 + fmt.time_digits] if fmt.time_digits else stamp[:8]
            vals = (iso, stamp, repr(p))
            writer.writerow([vals[order[c]] for c in cols])


def filter_session(
    tape: TickTape,
    open: int | str | dt.time = DEFAULT_OPEN,
    close: int | str | dt.time = DEFAULT_CLOSE,
) -> TickTape:
    """Keep trades with ``open <= time <= close``; drop days left empty."""
    lo, hi = _as_us(open), _as_us(close)
    if lo >= hi:
        raise ValueError("session open must precede close")
    kept = []
    dropped = 0
    for day in tape.days:
        mask = (day.times >= lo) & (day.times <= hi)
        if mask.all():
            kept.append(day)
        elif mask.any():
            kept.append(DayTape(day.date, day.times[mask], day.prices[mask]))
        else:
            dropped += 1
    if dropped:
        warnings.warn(f"{dropped} day(s) empty after session filtering were dropped", stacklevel=2)
    return TickTape(tuple(kept), tape.symbol)


def collapse_same_timestamp(day: DayTape) -> DayTape:
    """Replace each run of identical timestamps by one trade at the run's last price."""
    if day.n_trades < 2 or day.is_strictly_increasing():
        return day
    t = day.times
    keep = np.ones(t.size, dtype=bool)
    keep[:-1] = t[1:] != t[:-1]
    return DayTape(day.date, t[keep], day.prices[keep])


def collapse_tape(tape: TickTape) -> TickTape:
    return TickTape(tuple(collapse_same_timestamp(d) for d in tape.days), tape.symbol)


def from_arrays(
    dates: Sequence[dt.date],
    times: Sequence[np.ndarray],
    prices: Sequence[np.ndarray],
    symbol: str = "SIM",
) -> TickTape:
    return TickTape(tuple(DayTape(d, t, p) for d, t, p in zip(dates, times, prices)), symbol)
