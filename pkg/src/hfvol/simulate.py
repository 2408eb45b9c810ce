"""
Synthetic tick tapes from the multiplicative component model.

Every return is generated as::

    r_{t,n} = sqrt(w_{t,n}) * sigma_t * eps_{t,n} * s_{t,n} * z_{t,n}

with ``sigma_t`` a daily GARCH(1,1) path, ``eps`` an intraday GARCH(1,1)
path that runs on across days, ``s`` a deterministic time-of-day profile
normalized so that ``sum_n w s^2 = 1`` on every day, and ``z`` iid N(0, 1).
The daily GARCH is driven by the day's own standardized aggregate shock.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import os
from dataclasses import asdict, dataclass, field
from itertools import accumulate
from pathlib import Path

import numpy as np

from hfvol.garch import GarchParams
from hfvol.ticktape import (
    DEFAULT_CLOSE,
    DEFAULT_OPEN,
    US_PER_SECOND,
    DayTape,
    TickTape,
    format_time,
    parse_session,
    write_tape,
)

__all__ = [
    "Arrivals",
    "DayTruth",
    "SProfile",
    "SimConfig",
    "SimOutput",
    "export_truth",
    "load_config",
    "read_truth",
    "simulate",
    "simulate_daily",
]

DEFAULT_DAILY = GarchParams(omega=1.69e-6, alpha=0.104926, beta=0.873353)


@dataclass(frozen=True)
class SProfile:
    """Time-of-day variance shape ``f(tau)`` on normalized time ``tau`` in [0, 1].

    ``u_shape`` is ``1 + curvature * (2 tau - 1)**2``; ``custom`` is piecewise
    constant over equal bins given by ``table``.
    """

    kind: str = "u_shape"
    curvature: float = 3.0
    table: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("flat", "u_shape", "custom"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "u_shape" and self.curvature <= -1:
            raise ValueError("u_shape curvature must exceed -1 for a positive profile")
        if self.kind == "custom":
            if not self.table or min(self.table) <= 0:
                raise ValueError("custom profile needs a strictly positive table")

    @classmethod
    def parse(cls, text: str) -> SProfile:
        kind, _, arg = text.partition(":")
        if kind == "flat":
            return cls("flat")
        if kind == "u_shape":
            return cls("u_shape", float(arg) if arg else 3.0)
        if kind == "custom":
            return cls("custom", table=tuple(float(v) for v in arg.split(";")))
        raise ValueError(f"unknown profile {text!r}")

    def _integral(self, tau: np.ndarray) -> np.ndarray:
        tau = np.clip(np.asarray(tau, dtype=float), 0.0, 1.0)
        if self.kind == "flat":
            return tau
        if self.kind == "u_shape":
            k = self.curvature
            return tau + k * ((2 * tau - 1) ** 3 + 1) / 6.0
        vals = np.asarray(self.table, dtype=float)
        K = vals.size
        cum = np.concatenate(([0.0], np.cumsum(vals) / K))
        pos = tau * K
        idx = np.minimum(pos.astype(int), K - 1)
        return cum[idx] + (pos - idx) * vals[idx] / K

    def density(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if self.kind == "flat":
            return np.ones_like(tau)
        if self.kind == "u_shape":
            return 1 + self.curvature * (2 * tau - 1) ** 2
        vals = np.asarray(self.table, dtype=float)
        idx = np.minimum((np.clip(tau, 0, 1) * vals.size).astype(int), vals.size - 1)
        return vals[idx]

    def mean_over(self, tau0, tau1) -> np.ndarray:
        """Average of ``f`` over each interval ``[tau0, tau1]``."""
        tau0 = np.asarray(tau0, dtype=float)
        tau1 = np.asarray(tau1, dtype=float)
        width = tau1 - tau0
        out = np.empty(np.broadcast(tau0, tau1).shape)
        ok = width > 0
        out[ok] = ((self._integral(tau1) - self._integral(tau0)) / np.where(ok, width, 1))[ok]
        out[~ok] = self.density(tau0)[~ok] if np.any(~ok) else 0
        return out

    def __str__(self) -> str:
        if self.kind == "u_shape":
            return f"u_shape:{self.curvature:g}"
        if self.kind == "custom":
            return "custom:" + ";".join(f"{v:g}" for v in self.table)
        return "flat"


@dataclass(frozen=True)
class Arrivals:
    kind: str = "grid"
    value: float = 300.0  # seconds between trades, or trades per second

    def __post_init__(self) -> None:
        if self.kind not in ("grid", "poisson"):
            raise ValueError(f"unknown arrivals {self.kind!r}")
        if self.value <= 0:
            raise ValueError("arrival parameter must be > 0")

    @classmethod
    def parse(cls, text: str) -> Arrivals:
        kind, _, val = text.partition(":")
        if not val:
            raise ValueError(f"bad arrivals {text!r}, expected grid:<s> or poisson:<rate>")
        return cls(kind, float(val))

    def __str__(self) -> str:
        return f"{self.kind}:{self.value:g}"


@dataclass(frozen=True)
class SimConfig:
    days: int = 252
    daily_garch: GarchParams = DEFAULT_DAILY
    s_profile: SProfile = field(default_factory=SProfile)
    intraday_garch: tuple[float, float, float] = (0.05, 0.05, 0.90)
    arrivals: Arrivals = field(default_factory=Arrivals)
    seed: int = 0
    session: tuple[int, int] = (DEFAULT_OPEN, DEFAULT_CLOSE)
    start_date: dt.date = dt.date(2014, 1, 2)
    base_price: float = 100.0

    def __post_init__(self) -> None:
        if self.days < 1:
            raise ValueError("days must be >= 1")
        d = self.daily_garch
        if d.u != 0 or d.theta != 0:
            raise ValueError("the tape generator has no daily mean or MA term")
        if d.alpha + d.beta >= 1:
            raise ValueError("daily GARCH must be covariance stationary")
        om, a, b = self.intraday_garch
        if om <= 0 or a < 0 or b < 0 or a + b >= 1:
            raise ValueError("intraday GARCH needs omega > 0, alpha, beta >= 0, alpha + beta < 1")
        lo, hi = self.session
        if lo >= hi:
            raise ValueError("session open must precede close")
        length_s = (hi - lo) / US_PER_SECOND
        if self.arrivals.kind == "grid":
            step = int(round(self.arrivals.value * US_PER_SECOND))
            if (hi - lo) % step:
                raise ValueError("grid spacing must divide the session length")
        elif self.arrivals.value * length_s < 10:
            raise ValueError("poisson rate too low: fewer than 10 expected trades a day")
        if self.base_price <= 0:
            raise ValueError("base_price must be > 0")

    def to_dict(self) -> dict:
        return {
            "days": self.days,
            "daily_garch": [self.daily_garch.omega, self.daily_garch.alpha, self.daily_garch.beta],
            "s_profile": str(self.s_profile),
            "intraday_garch": list(self.intraday_garch),
            "arrivals": str(self.arrivals),
            "seed": self.seed,
            "session": f"{format_time(self.session[0])[:5]}-{format_time(self.session[1])[:5]}",
            "start_date": self.start_date.isoformat(),
            "base_price": self.base_price,
        }

    @classmethod
    def from_mapping(cls, m: dict[str, str]) -> SimConfig:
        kw: dict = {}
        for key, raw in m.items():
            val = str(raw).strip()
            if key == "days":
                kw["days"] = int(val)
            elif key == "seed":
                kw["seed"] = int(val)
            elif key in ("daily", "daily_garch"):
                om, a, b = (float(v) for v in val.strip("[]").split(","))
                kw["daily_garch"] = GarchParams(om, a, b)
            elif key in ("intraday", "intraday_garch"):
                kw["intraday_garch"] = tuple(float(v) for v in val.strip("[]").split(","))
            elif key in ("profile", "s_profile"):
                kw["s_profile"] = SProfile.parse(val)
            elif key == "arrivals":
                kw["arrivals"] = Arrivals.parse(val)
            elif key == "session":
                kw["session"] = parse_session(val)
            elif key == "start_date":
                kw["start_date"] = dt.date.fromisoformat(val)
            elif key == "base_price":
                kw["base_price"] = float(val)
            else:
                raise ValueError(f"unknown config key {key!r}")
        return cls(**kw)


def load_config(path) -> SimConfig:
    """Read a ``key = value`` config file (``#`` starts a comment)."""
    entries: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, val = line.split("=", 1)
            entries[key.strip()] = val.strip()
    return SimConfig.from_mapping(entries)


@dataclass(frozen=True)
class DayTruth:
    date: dt.date
    boundaries: np.ndarray  # microseconds, one more than returns
    w: np.ndarray
    sigma: float
    s: np.ndarray
    eps: np.ndarray
    z: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class SimOutput:
    tape: TickTape
    truth: tuple[DayTruth, ...]
    sigma: np.ndarray
    config: SimConfig

    @property
    def daily_returns(self) -> np.ndarray:
        return np.array([t.r.sum() for t in self.truth])


def _trading_dates(start: dt.date, n: int) -> list[dt.date]:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    days = np.busday_offset(first, np.arange(n), roll="forward")
    return [d.astype("datetime64[D]").astype(dt.date) for d in days]


def _arrival_times(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    lo, hi = cfg.session
    if cfg.arrivals.kind == "grid":
        step = int(round(cfg.arrivals.value * US_PER_SECOND))
        return lo + step * np.arange((hi - lo) // step + 1, dtype=np.int64)
    length = (hi - lo) / US_PER_SECOND
    while True:
        count = rng.poisson(cfg.arrivals.value * length)
        raw = np.sort(rng.uniform(0.0, length, count))
        times = np.unique(lo + np.rint(raw * US_PER_SECOND).astype(np.int64))
        if times.size >= 2:
            return times


def simulate(config: SimConfig) -> SimOutput:
    """Generate a tape with its ground-truth components (deterministic in ``seed``)."""
    cfg = config
    lo, hi = cfg.session
    length = hi - lo
    om_d, a_d, b_d = cfg.daily_garch.omega, cfg.daily_garch.alpha, cfg.daily_garch.beta
    om_i, a_i, b_i = cfg.intraday_garch
    dates = _trading_dates(cfg.start_date, cfg.days)
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.days)

    sigma2 = om_d / (1.0 - a_d - b_d)
    eps2_prev = om_i / (1.0 - a_i - b_i)
    z_prev = None
    price = cfg.base_price
    days, truth, sig = [], [], np.empty(cfg.days)
    for k, (date, ss) in enumerate(zip(dates, streams)):
        rng = np.random.default_rng(ss)
        times = _arrival_times(cfg, rng)
        tau = (times - lo) / length
        w = np.diff(times) / US_PER_SECOND
        f = cfg.s_profile.mean_over(tau[:-1], tau[1:])
        s2 = f / np.sum(w * f)
        z = rng.standard_normal(w.size)

        first = eps2_prev if z_prev is None else om_i + (a_i * z_prev**2 + b_i) * eps2_prev
        coef = a_i * z[:-1] ** 2 + b_i
        eps2 = np.fromiter(
            accumulate(coef.tolist(), lambda acc, c: om_i + c * acc, initial=first),
            dtype=float,
            count=w.size,
        )
        eps = np.sqrt(eps2)
        s = np.sqrt(s2)
        sigma = np.sqrt(sigma2)
        r = np.sqrt(w) * sigma * eps * s * z
        logp = np.log(price) + np.concatenate(([0.0], np.cumsum(r)))
        prices = np.exp(logp)
        days.append(DayTape(date, times, prices))
        truth.append(DayTruth(date, times, w, float(sigma), s, eps, z, r))
        sig[k] = sigma

        scale = np.sqrt(np.sum(w * eps2 * s2))
        z_day = np.sum(np.sqrt(w) * eps * s * z) / scale
        sigma2 = om_d + (a_d * z_day**2 + b_d) * sigma2
        eps2_prev, z_prev = eps2[-1], z[-1]
        price = prices[-1]
    return SimOutput(TickTape(tuple(days)), tuple(truth), sig, cfg)


def simulate_daily(
    params: GarchParams,
    n: int,
    seed: int | np.random.Generator = 0,
    reps: int | None = None,
    burn: int = 500,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate MA(1)-GARCH(1,1) returns and conditional variances.

    Returns arrays of shape ``(n,)``, or ``(reps, n)`` when ``reps`` is given.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    m = 1 if reps is None else int(reps)
    p = params
    total = n + burn
    z = rng.standard_normal((total, m))
    x = np.empty((total, m))
    h = np.empty((total, m))
    stationary = p.alpha + p.beta < 1
    h_t = np.full(m, p.omega / (1 - p.alpha - p.beta) if stationary else p.omega)
    e_prev = np.zeros(m)
    for t in range(total):
        e = np.sqrt(h_t) * z[t]
        x[t] = p.u + p.theta * e_prev + e
        h[t] = h_t
        h_t = p.omega + p.alpha * e * e + p.beta * h_t
        e_prev = e
    x, h = x[burn:].T, h[burn:].T
    if reps is None:
        return x[0], h[0]
    return x, h


def export_truth(out: SimOutput, path) -> dict[str, Path]:
    """Write ``tape.csv``, ``truth.csv`` (keyed by date, n) and ``daily.csv`` into ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    files = {
        "tape": path / "tape.csv",
        "truth": path / "truth.csv",
        "daily": path / "daily.csv",
        "config": path / "config.json",
    }
    with open(files["tape"], "w", newline="", encoding="utf-8") as fh:
        write_tape(out.tape, fh)
    with open(files["truth"], "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["date", "n", "start_time", "end_time", "w", "sigma", "s", "eps", "z", "r"])
        for tr in out.truth:
            iso = tr.date.isoformat()
            for i in range(tr.r.size):
                wr.writerow([
                    iso, i, format_time(tr.boundaries[i]), format_time(tr.boundaries[i + 1]),
                    repr(float(tr.w[i])), repr(tr.sigma), repr(float(tr.s[i])),
                    repr(float(tr.eps[i])), repr(float(tr.z[i])), repr(float(tr.r[i])),
                ])
    with open(files["daily"], "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["date", "sigma", "daily_return"])
        for tr in out.truth:
            wr.writerow([tr.date.isoformat(), repr(tr.sigma), repr(float(tr.r.sum()))])
    with open(files["config"], "w", encoding="utf-8") as fh:
        json.dump(out.config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return files


def read_truth(path) -> dict[str, np.ndarray]:
    """Load ``truth.csv`` columns as arrays (``date`` as ISO strings)."""
    path = Path(path)
    if path.is_dir():
        path = path / "truth.csv"
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out: dict[str, np.ndarray] = {"date": np.array([r["date"] for r in rows])}
    out["n"] = np.array([int(r["n"]) for r in rows])
    for key in ("w", "sigma", "s", "eps", "z", "r"):
        out[key] = np.array([float(r[key]) for r in rows])
    return out
