"""
Return construction from day tapes.

Three schemes are supported: fixed clock intervals (``time:<seconds>``),
fixed trade counts (``txn:<T>``) and raw tick-by-tick returns (``tick``).
Returns never span two days.
"""

from __future__ import annotations

import datetime as dt
import warnings
from dataclasses import dataclass

import numpy as np

from hfvol.ticktape import DEFAULT_CLOSE, DEFAULT_OPEN, US_PER_SECOND, DayTape, TickTape

__all__ = [
    "DayReturns",
    "ReturnSeries",
    "Scheme",
    "aggregate",
    "daily_returns",
    "pricelock",
    "realized_measures",
    "tick_returns",
    "time_aggregate",
    "txn_aggregate",
]


@dataclass(frozen=True)
class Scheme:
    """Aggregation scheme; ``size`` is seconds for ``time`` and trades for ``txn``."""

    kind: str
    size: float = 0

    def __post_init__(self) -> None:
        if self.kind not in ("time", "txn", "tick"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "txn" and (int(self.size) != self.size or self.size < 1):
            raise ValueError("txn scheme needs an integer trade count >= 1")
        if self.kind == "time" and self.size <= 0:
            raise ValueError("time scheme needs a positive interval")

    @classmethod
    def parse(cls, text: str) -> Scheme:
        text = text.strip()
        if text == "tick":
            return cls("tick", 1)
        kind, _, size = text.partition(":")
        if not size:
            raise ValueError(f"bad scheme {text!r}, expected time:<s>, txn:<T> or tick")
        value = float(size)
        if value.is_integer():
            value = int(value)
        return cls(kind, value)

    def __str__(self) -> str:
        return "tick" if self.kind == "tick" else f"{self.kind}:{self.size:g}"

    @property
    def interval_us(self) -> int:
        if self.kind != "time":
            raise ValueError("interval is defined for time schemes only")
        return int(round(self.size * US_PER_SECOND))


@dataclass(frozen=True)
class DayReturns:
    """Log returns of one day with interval boundaries (microseconds).

    ``returns[n] = log(P(boundaries[n+1])) - log(P(boundaries[n]))`` and
    ``durations[n]`` is the interval length in seconds.
    """

    date: dt.date
    returns: np.ndarray
    boundaries: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.returns, dtype=np.float64)
        b = np.asarray(self.boundaries, dtype=np.int64)
        if r.size == 0 and b.size == 0:
            b = np.zeros(0, dtype=np.int64)
        elif b.size != r.size + 1:
            raise ValueError("need exactly one more boundary than returns")
        if b.size > 1 and np.any(np.diff(b) <= 0):
            raise ValueError(f"{self.date}: interval durations must be > 0")
        r.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "boundaries", b)

    def __len__(self) -> int:
        return int(self.returns.size)

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.boundaries) / US_PER_SECOND

    @property
    def starts(self) -> np.ndarray:
        return self.boundaries[:-1]

    @property
    def ends(self) -> np.ndarray:
        return self.boundaries[1:]


@dataclass(frozen=True)
class ReturnSeries:
    days: tuple[DayReturns, ...]
    scheme: Scheme
    session: tuple[int, int] = (DEFAULT_OPEN, DEFAULT_CLOSE)

    def __post_init__(self) -> None:
        object.__setattr__(self, "days", tuple(self.days))

    @property
    def label(self) -> str:
        return str(self.scheme)

    @property
    def dates(self) -> list[dt.date]:
        return [d.date for d in self.days]

    @property
    def values(self) -> np.ndarray:
        if not self.days:
            return np.zeros(0)
        return np.concatenate([d.returns for d in self.days])

    @property
    def durations(self) -> np.ndarray:
        if not self.days:
            return np.zeros(0)
        return np.concatenate([d.durations for d in self.days])

    @property
    def n_obs(self) -> int:
        return sum(len(d) for d in self.days)

    def is_regular_grid(self) -> bool:
        """True when every day shares identical interval boundaries."""
        if self.scheme.kind != "time" or not self.days:
            return False
        first = self.days[0].boundaries
        return all(np.array_equal(d.boundaries, first) for d in self.days[1:])


def pricelock(timing, day: DayTape):
    """Price at ``timing`` as the mean of the bracketing trade prices.

    The left price is the last trade at or before ``timing`` and the right
    price the first trade at or after it. Before the first trade both sides
    resolve to the first price, after the last trade to the last price.
    ``timing`` (microseconds) may be a scalar or an array.
    """
    if day.n_trades == 0:
        raise ValueError("pricelock needs a non-empty day")
    t = day.times
    p = day.prices
    timing_arr = np.asarray(timing, dtype=np.int64)
    left = np.searchsorted(t, timing_arr, side="right") - 1
    right = np.searchsorted(t, timing_arr, side="left")
    pleft = p[np.clip(left, 0, t.size - 1)]
    pleft = np.where(left < 0, p[0], pleft)
    pright = np.where(right >= t.size, p[-1], p[np.clip(right, 0, t.size - 1)])
    out = (pleft + pright) / 2.0
    if timing_arr.ndim == 0:
        return float(out)
    return out


def _grid(interval_us: int, session: tuple[int, int]) -> np.ndarray:
    lo, hi = session
    length = hi - lo
    if interval_us <= 0 or length % interval_us:
        raise ValueError(
            f"interval {interval_us / US_PER_SECOND:g}s does not divide the "
            f"session length {length / US_PER_SECOND:g}s"
        )
    return lo + interval_us * np.arange(length // interval_us + 1, dtype=np.int64)


def time_aggregate(
    day: DayTape,
    interval: float,
    session: tuple[int, int] = (DEFAULT_OPEN, DEFAULT_CLOSE),
) -> DayReturns:
    """Clock-time returns over a grid of ``interval`` seconds covering the session."""
    if day.n_trades < 2:
        raise ValueError(f"{day.date}: need at least 2 trades for time aggregation")
    grid = _grid(int(round(interval * US_PER_SECOND)), session)
    prices = pricelock(grid, day)
    return DayReturns(day.date, np.diff(np.log(prices)), grid)


def txn_aggregate(day: DayTape, T: int) -> DayReturns:
    """Returns over consecutive blocks of ``T`` trades; the trailing partial block is dropped."""
    T = int(T)
    if T < 1:
        raise ValueError("T must be >= 1")
    n_blocks = (day.n_trades - 1) // T if day.n_trades else 0
    if n_blocks == 0:
        warnings.warn(f"{day.date}: fewer than T+1={T + 1} trades, no returns", stacklevel=2)
        return DayReturns(day.date, np.zeros(0), np.zeros(0, dtype=np.int64))
    idx = T * np.arange(n_blocks + 1)
    b = day.times[idx]
    if np.any(np.diff(b) <= 0):
        raise ValueError(
            f"{day.date}: zero-duration block; collapse same-timestamp trades first"
        )
    logp = np.log(day.prices[idx])
    return DayReturns(day.date, np.diff(logp), b)


def tick_returns(day: DayTape) -> DayReturns:
    return txn_aggregate(day, 1)


def aggregate(
    tape: TickTape,
    scheme: Scheme | str,
    session: tuple[int, int] = (DEFAULT_OPEN, DEFAULT_CLOSE),
) -> ReturnSeries:
    if isinstance(scheme, str):
        scheme = Scheme.parse(scheme)
    if scheme.kind == "time":
        days = [time_aggregate(d, scheme.size, session) for d in tape.days]
    else:
        T = 1 if scheme.kind == "tick" else int(scheme.size)
        days = [txn_aggregate(d, T) for d in tape.days]
    return ReturnSeries(tuple(days), scheme, session)


def daily_returns(tape: TickTape) -> np.ndarray:
    """Open-to-close log return of each day, first trade to last trade."""
    out = np.empty(len(tape.days))
    for i, day in enumerate(tape.days):
        if day.n_trades < 2:
            raise ValueError(f"{day.date}: need at least 2 trades for a daily return")
        out[i] = np.log(day.prices[-1]) - np.log(day.prices[0])
    return out


def realized_measures(day: DayReturns | np.ndarray) -> tuple[float, float]:
    """``(sum r**2, sum |r|)`` over one day's returns."""
    r = day.returns if isinstance(day, DayReturns) else np.asarray(day, dtype=float)
    return float(np.sum(r * r)), float(np.sum(np.abs(r)))
