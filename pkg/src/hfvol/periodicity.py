"""
Intraday periodicity estimation and return filtering.

The periodic component ``s^2`` is estimated as a cross-day average of
duration- and day-deflated squared returns. On a shared clock grid this is
a per-cell mean of ``r^2 / (w sigma_t^2)``. For returns whose intervals move
from day to day (transaction or tick schemes) each interval is treated as a
window of clock time, and every day's trades inside that window contribute a
variance-rate estimate.

Profiles are normalized after averaging so that ``sum_n w_n s2_n = 1`` over
a window set that tiles the session, durations ``w`` in seconds.
"""

from __future__ import annotations

import datetime as dt
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from hfvol.aggregate import ReturnSeries, pricelock
from hfvol.ticktape import (
    DEFAULT_CLOSE,
    DEFAULT_OPEN,
    US_PER_SECOND,
    DayTape,
    TickTape,
    collapse_same_timestamp,
)

__all__ = [
    "FilteredSeries",
    "PeriodicityProfile",
    "WindowIndex",
    "estimate_periodicity_grid",
    "estimate_periodicity_irregular",
    "estimate_periodicity_series",
    "filter_returns",
    "tick_standardize",
    "window_index",
    "window_variance_contribution",
]

NORMALIZATIONS = ("duration", "unit", "none")


@dataclass(frozen=True)
class PeriodicityProfile:
    """Estimated ``s^2`` on a set of clock-time windows.

    Attributes
    ----------
    starts, ends : ndarray of int64
        Window edges, microseconds since midnight.
    s2 : ndarray
        Normalized periodicity values, strictly positive.
    raw : ndarray
        Cross-day averages before normalization.
    normalization : str
        ``duration`` (``sum w s2 = 1``), ``unit`` (``mean s2 = 1``) or ``none``.
    source : str
        ``time_grid`` or ``irregular``.
    method : str
        ``grid``, ``ticks`` or ``edges``.
    gap_weight : float
        ``sum w s2`` carried by session stretches outside the windows; zero
        when the windows tile the session.
    """

    starts: np.ndarray
    ends: np.ndarray
    s2: np.ndarray
    raw: np.ndarray
    normalization: str
    source: str
    method: str = "grid"
    gap_weight: float = 0.0

    def __post_init__(self) -> None:
        for name in ("starts", "ends"):
            a = np.asarray(getattr(self, name), dtype=np.int64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        for name in ("s2", "raw"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not (self.starts.shape == self.ends.shape == self.s2.shape):
            raise ValueError("starts, ends and s2 must have equal length")
        if np.any(self.ends <= self.starts):
            raise ValueError("windows must have positive length")
        if not np.all(np.isfinite(self.s2)) or np.any(self.s2 <= 0):
            raise ValueError("periodicity estimates must be strictly positive")

    def __len__(self) -> int:
        return int(self.s2.size)

    @property
    def durations(self) -> np.ndarray:
        return (self.ends - self.starts) / US_PER_SECOND

    @property
    def s(self) -> np.ndarray:
        return np.sqrt(self.s2)

    def matches(self, boundaries: np.ndarray) -> bool:
        b = np.asarray(boundaries, dtype=np.int64)
        return (
            b.size == self.s2.size + 1
            and np.array_equal(b[:-1], self.starts)
            and np.array_equal(b[1:], self.ends)
        )


@dataclass(frozen=True)
class WindowIndex:
    """Trades of one day with ``x1 <= time <= x2``: indices ``first .. last - 1``."""

    first: int
    last: int

    def __len__(self) -> int:
        return max(self.last - self.first, 0)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.first, max(self.first, self.last))

    @property
    def n_returns(self) -> int:
        return max(len(self) - 1, 0)


@dataclass(frozen=True)
class FilteredSeries:
    """Filtered returns ``y = r / (sqrt(w) sigma_t s) / scale`` per day."""

    dates: tuple[dt.date, ...]
    y: tuple[np.ndarray, ...]
    scale: float
    scheme: str

    @property
    def values(self) -> np.ndarray:
        return np.concatenate(self.y) if self.y else np.zeros(0)

    def rows(self):
        for date, arr in zip(self.dates, self.y):
            for n, v in enumerate(arr.tolist()):
                yield date, n, v


def _sigma_for(dates: Sequence[dt.date], sigma) -> np.ndarray:
    if isinstance(sigma, Mapping):
        missing = [d for d in dates if d not in sigma]
        if missing:
            raise ValueError(f"no daily volatility for {missing[0]}")
        out = np.array([float(sigma[d]) for d in dates])
    else:
        out = np.asarray(sigma, dtype=float).ravel()
        if out.size != len(dates):
            raise ValueError(f"need {len(dates)} daily volatilities, got {out.size}")
    if not np.all(np.isfinite(out)) or np.any(out <= 0):
        raise ValueError("daily volatilities must be finite and > 0")
    return out


def _normalize(raw: np.ndarray, w: np.ndarray, normalization: str, gap: float = 0.0):
    if normalization == "duration":
        c = float(np.sum(w * raw)) + gap
    elif normalization == "unit":
        c = float(np.mean(raw))
    elif normalization == "none":
        c = 1.0
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    if not c > 0:
        raise ValueError("periodicity estimate is zero on every window")
    return raw / c, gap / c


def estimate_periodicity_grid(
    series: ReturnSeries,
    sigma,
    normalization: str = "duration",
) -> PeriodicityProfile:
    """Per-cell mean of ``r^2 / (w sigma_t^2)`` across days of a shared grid.

    Parameters
    ----------
    series : ReturnSeries
        Clock-time returns; every day must share the same boundaries.
    sigma : array_like or mapping
        Daily volatility per day of ``series`` (aligned array or date map).
    normalization : {"duration", "unit", "none"}
    """
    if series.scheme.kind != "time":
        raise ValueError("grid estimator needs a clock-time scheme")
    if not series.days:
        raise ValueError("empty series")
    if not series.is_regular_grid():
        raise ValueError("days do not share a common grid")
    sig = _sigma_for(series.dates, sigma)
    first = series.days[0]
    w = first.durations
    r = np.vstack([d.returns for d in series.days])
    raw = np.mean(r * r / sig[:, None] ** 2, axis=0) / w
    s2, _ = _normalize(raw, w, normalization)
    return PeriodicityProfile(first.starts, first.ends, s2, raw, normalization, "time_grid")


def window_index(day: DayTape, window: tuple[int, int]) -> WindowIndex:
    """Contiguous trades of ``day`` inside ``[x1, x2]`` (binary search)."""
    x1, x2 = int(window[0]), int(window[1])
    lo = int(np.searchsorted(day.times, x1, side="left"))
    hi = int(np.searchsorted(day.times, x2, side="right"))
    return WindowIndex(lo, max(hi, lo))


def _edge_contrib(day: DayTape, x1, x2) -> np.ndarray:
    p1 = pricelock(np.asarray(x1), day)
    p2 = pricelock(np.asarray(x2), day)
    dur = (np.asarray(x2) - np.asarray(x1)) / US_PER_SECOND
    return np.log(np.asarray(p2) / np.asarray(p1)) ** 2 / dur


def _day_rates(day: DayTape, x1: np.ndarray, x2: np.ndarray, method: str) -> np.ndarray:
    """Undeflated ``V`` (times ``sigma^2``) of one day on many windows."""
    if method == "edges":
        return _edge_contrib(day, x1, x2)
    t = day.times
    logp = np.log(day.prices)
    q = np.diff(logp) ** 2 / (np.diff(t) / US_PER_SECOND)
    cum = np.concatenate(([0.0], np.cumsum(q)))
    lo = np.searchsorted(t, x1, side="left")
    hi = np.searchsorted(t, x2, side="right") - 1
    n_ret = hi - lo
    out = np.empty(x1.size)
    ok = n_ret >= 1
    out[ok] = (cum[hi[ok]] - cum[lo[ok]]) / n_ret[ok]
    if np.any(~ok):
        out[~ok] = _edge_contrib(day, x1[~ok], x2[~ok])
    return out


def window_variance_contribution(
    day: DayTape,
    window: tuple[int, int],
    sigma: float,
    method: str = "ticks",
) -> float:
    """Variance-rate contribution ``V_k`` of one day to one window.

    ``ticks`` averages ``r^2 / (w sigma^2)`` over the tick returns between
    trades inside the window; with fewer than two such trades the window
    edges are priced by :func:`pricelock` and one squared return over the
    whole window is used. ``edges`` always uses the pricelock return.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    if method not in ("ticks", "edges"):
        raise ValueError(f"unknown method {method!r}")
    day = collapse_same_timestamp(day)
    x1 = np.array([int(window[0])], dtype=np.int64)
    x2 = np.array([int(window[1])], dtype=np.int64)
    if x2[0] <= x1[0]:
        raise ValueError("window must have positive length")
    return float(_day_rates(day, x1, x2, method)[0] / sigma**2)


def _with_gaps(starts, ends, session):
    lo, hi = session
    x1, x2 = [np.asarray(starts, dtype=np.int64)], [np.asarray(ends, dtype=np.int64)]
    if starts.size and np.any(starts[1:] != ends[:-1]):
        raise ValueError("windows must be contiguous")
    gaps = []
    if starts[0] > lo:
        gaps.append((lo, starts[0]))
    if ends[-1] < hi:
        gaps.append((ends[-1], hi))
    if gaps:
        g = np.array(gaps, dtype=np.int64)
        x1.append(g[:, 0])
        x2.append(g[:, 1])
    return np.concatenate(x1), np.concatenate(x2), len(gaps)


def _cross_day_mean(tape: TickTape, sig: np.ndarray, x1, x2, method, threads) -> np.ndarray:
    days = [collapse_same_timestamp(d) for d in tape.days]

    def one(k):
        return _day_rates(days[k], x1, x2, method) / sig[k] ** 2

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(one, range(len(days))))
    else:
        parts = [one(k) for k in range(len(days))]
    total = np.zeros(x1.size)
    for part in parts:  # fixed order for reproducible sums
        total += part
    return total / len(days)


def estimate_periodicity_irregular(
    windows,
    tape: TickTape,
    sigma,
    method: str = "ticks",
    normalization: str = "duration",
    session: tuple[int, int] = (DEFAULT_OPEN, DEFAULT_CLOSE),
    threads: int | None = None,
) -> PeriodicityProfile:
    """Cross-day average of window contributions over all days of ``tape``.

    Parameters
    ----------
    windows : array_like of int64
        Contiguous window boundaries (microseconds), e.g. one day's return
        boundaries; ``len(windows) - 1`` windows.
    tape : TickTape
        Every day contributes once.
    sigma : array_like or mapping
        Daily volatility per tape day.
    method : {"ticks", "edges"}
        ``edges`` reproduces :func:`estimate_periodicity_grid` exactly when
        the windows are the grid cells.

    Notes
    -----
    Under ``duration`` normalization session stretches not covered by the
    windows are estimated too, and ``sum w s2`` over windows plus gaps is 1.
    """
    if method not in ("ticks", "edges"):
        raise ValueError(f"unknown method {method!r}")
    b = np.asarray(windows, dtype=np.int64).ravel()
    if b.size < 2 or np.any(np.diff(b) <= 0):
        raise ValueError("need at least one window with increasing boundaries")
    starts, ends = b[:-1], b[1:]
    if starts[0] < session[0] or ends[-1] > session[1]:
        raise ValueError("windows must lie within the session")
    sig = _sigma_for(tape.dates, sigma)
    x1, x2, n_gaps = _with_gaps(starts, ends, session)
    mean = _cross_day_mean(tape, sig, x1, x2, method, threads)
    raw, gap_raw = mean[: starts.size], mean[starts.size :]
    gap_w = (x2[starts.size :] - x1[starts.size :]) / US_PER_SECOND
    w = (ends - starts) / US_PER_SECOND
    gap = float(np.sum(gap_w * gap_raw)) if n_gaps and normalization == "duration" else 0.0
    s2, gap_weight = _normalize(raw, w, normalization, gap)
    return PeriodicityProfile(starts, ends, s2, raw, normalization, "irregular", method, gap_weight)


def estimate_periodicity_series(
    series: ReturnSeries,
    tape: TickTape,
    sigma,
    method: str = "ticks",
    normalization: str = "duration",
    threads: int | None = None,
) -> dict[dt.date, PeriodicityProfile]:
    """One irregular profile per day of ``series``, on that day's own intervals."""
    sig = _sigma_for(tape.dates, sigma)
    per_day = []
    for d in series.days:
        if len(d) == 0:
            continue
        x1, x2, n_gaps = _with_gaps(d.starts, d.ends, series.session)
        per_day.append((d, x1, x2, n_gaps))
    if not per_day:
        raise ValueError("series has no returns")
    all_x1 = np.concatenate([p[1] for p in per_day])
    all_x2 = np.concatenate([p[2] for p in per_day])
    mean = _cross_day_mean(tape, sig, all_x1, all_x2, method, threads)
    out: dict[dt.date, PeriodicityProfile] = {}
    pos = 0
    for d, x1, x2, n_gaps in per_day:
        m = mean[pos : pos + x1.size]
        pos += x1.size
        n = len(d)
        w = d.durations
        gap_w = (x2[n:] - x1[n:]) / US_PER_SECOND
        gap = float(np.sum(gap_w * m[n:])) if n_gaps and normalization == "duration" else 0.0
        s2, gap_weight = _normalize(m[:n], w, normalization, gap)
        out[d.date] = PeriodicityProfile(
            d.starts, d.ends, s2, m[:n], normalization, "irregular", method, gap_weight
        )
    return out


def tick_standardize(tradetimes, r, tape: TickTape) -> np.ndarray:
    """Divide each return by the root cross-day mean of in-window realized variance.

    For return ``r[i]`` over ``[tradetimes[i], tradetimes[i+1]]`` every tape
    day contributes the sum of squared tick returns between its trades
    inside that window (zero when it has fewer than two).
    """
    t = np.asarray(tradetimes, dtype=np.int64)
    r = np.asarray(r, dtype=float)
    if t.size != r.size + 1:
        raise ValueError("need one more trade time than returns")
    v = np.zeros(r.size)
    for day in tape.days:
        logp = np.log(day.prices)
        cum = np.concatenate(([0.0], np.cumsum(np.diff(logp) ** 2)))
        lo = np.searchsorted(day.times, t[:-1], side="left")
        hi = np.searchsorted(day.times, t[1:], side="right") - 1
        v += np.where(hi > lo, cum[np.maximum(hi, lo)] - cum[lo], 0.0)
    sv = np.sqrt(v / len(tape.days))
    return r / sv


def filter_returns(
    series: ReturnSeries,
    sigma,
    profile: PeriodicityProfile | Mapping[dt.date, PeriodicityProfile],
    rescale: bool = True,
) -> FilteredSeries:
    """``y = r / (sqrt(w) sigma_t s)``, then rescaled to unit sample variance.

    ``profile`` is a single template that must match every day's intervals,
    or a map from date to that day's profile.
    """
    sig = _sigma_for(series.dates, sigma)
    ys = []
    for d, sd in zip(series.days, sig):
        prof = profile.get(d.date) if isinstance(profile, Mapping) else profile
        if len(d) == 0:
            ys.append(np.zeros(0))
            continue
        if prof is None or not prof.matches(d.boundaries):
            raise ValueError(f"{d.date}: periodicity profile does not cover the day's intervals")
        ys.append(d.returns / (np.sqrt(d.durations) * sd * prof.s))
    allv = np.concatenate(ys)
    scale = 1.0
    if rescale:
        if allv.size < 2:
            raise ValueError("need at least 2 filtered returns to rescale")
        scale = float(np.std(allv, ddof=1))
        if scale == 0:
            raise ValueError("filtered returns are constant")
        ys = [y / scale for y in ys]
    return FilteredSeries(tuple(series.dates), tuple(ys), scale, str(series.scheme))
