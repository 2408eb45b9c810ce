"""
Descriptive statistics, sample autocorrelations and intraday profiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hfvol.aggregate import ReturnSeries

__all__ = [
    "AcfTable",
    "DescriptiveStats",
    "GAUSSIAN_ABS_C",
    "acf",
    "describe",
    "intraday_profile",
    "theoretical_abs_corr",
]

# c = (E|z|)^-2 - 1 for standard normal z, E|z| = sqrt(2/pi)
GAUSSIAN_ABS_C = np.pi / 2.0 - 1.0


@dataclass(frozen=True)
class DescriptiveStats:
    n: int
    mean: float
    variance: float
    kurtosis: float
    skewness: float
    max: float
    min: float
    lag1_autocorr: float

    def as_dict(self) -> dict[str, float]:
        return {
            "n": self.n,
            "mean": self.mean,
            "variance": self.variance,
            "kurtosis": self.kurtosis,
            "skewness": self.skewness,
            "max": self.max,
            "min": self.min,
            "lag1_autocorr": self.lag1_autocorr,
        }


@dataclass(frozen=True)
class AcfTable:
    lags: np.ndarray
    values: np.ndarray
    bound: float
    n: int

    def significant(self) -> np.ndarray:
        return np.abs(self.values) > self.bound


def describe(x) -> DescriptiveStats:
    """Sample moments with raw (non-excess) kurtosis.

    Variance uses the ``n - 1`` denominator; skewness and kurtosis are
    population central-moment ratios, so a Gaussian sample gives about 3.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 observations")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    mean = float(x.mean())
    d = x - mean
    m2 = float(np.mean(d * d))
    if m2 == 0.0:
        raise ValueError("constant series: kurtosis undefined")
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    return DescriptiveStats(
        n=n,
        mean=mean,
        variance=m2 * n / (n - 1),
        kurtosis=m4 / m2**2,
        skewness=m3 / m2**1.5,
        max=float(x.max()),
        min=float(x.min()),
        lag1_autocorr=float(_autocorr(d, 1)[0]),
    )


def _autocorr(d: np.ndarray, max_lag: int) -> np.ndarray:
    n = d.size
    # scale-free, so rescale first to keep tiny series out of the subnormal range
    d = d / np.max(np.abs(d))
    size = 1 << int(np.ceil(np.log2(2 * n - 1)))
    f = np.fft.rfft(d, size)
    full = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    return full[1:] / full[0]


def acf(x, max_lag: int) -> AcfTable:
    """Sample autocorrelations at lags ``1..max_lag`` with bound ``2/sqrt(n)``."""
    x = np.asarray(x, dtype=np.float64).ravel()
    n = x.size
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if n <= max_lag:
        raise ValueError(f"need more than {max_lag} observations, got {n}")
    d = x - x.mean()
    if not np.any(d):
        raise ValueError("constant series: autocorrelation undefined")
    values = np.clip(_autocorr(d, max_lag), -1.0, 1.0)
    return AcfTable(np.arange(1, max_lag + 1), values, 2.0 / np.sqrt(n), n)


def intraday_profile(series: ReturnSeries, reducer: str = "mean_abs") -> np.ndarray:
    """Cross-day average of ``r`` or ``|r|`` at each grid position."""
    if series.scheme.kind != "time":
        raise ValueError("intraday profiles need a clock-time grid")
    if reducer not in ("mean", "mean_abs"):
        raise ValueError(f"unknown reducer {reducer!r}")
    if not series.days:
        raise ValueError("empty series")
    lengths = {len(d) for d in series.days}
    if len(lengths) != 1:
        raise ValueError("days do not share a common grid")
    mat = np.vstack([d.returns for d in series.days])
    if reducer == "mean_abs":
        mat = np.abs(mat)
    return mat.mean(axis=0)


def theoretical_abs_corr(
    cov_sigma: float,
    var_sigma: float,
    mean_sigma2: float,
    s,
    n: int,
    m: int,
    mean_sigma: float | None = None,
    c: float = GAUSSIAN_ABS_C,
) -> float:
    """Correlation of absolute intraday returns under periodic volatility.

    Returns ``Corr(|r_{t,n}|, |r_{tau,m}|)`` for the model
    ``r = sigma_t * s_n * z / sqrt(N)``, averaging over intraday positions so
    the periodic weights enter through their circular lag-``n - m``
    autocovariance. At ``n == m`` the expression reduces to::

        (cov + v E^2(sigma)) / (var + c E(sigma^2) + v E^2(sigma))

    with ``v = Var(s) / mean(s^2)``.

    Parameters
    ----------
    cov_sigma : float
        ``Cov(sigma_t, sigma_tau)`` between the two days.
    var_sigma, mean_sigma2 : float
        ``Var(sigma)`` and ``E(sigma^2)``.
    s : array_like
        Positive periodic weights ``s_1..s_N``.
    n, m : int
        Grid positions (0-based); only ``n - m`` matters.
    mean_sigma : float, optional
        ``E(sigma)``; derived as ``sqrt(E(sigma^2) - Var(sigma))`` if omitted.
    """
    s = np.asarray(s, dtype=np.float64).ravel()
    if s.size == 0 or np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise ValueError("periodic weights must be strictly positive")
    if var_sigma < 0 or mean_sigma2 < 0:
        raise ValueError("variance and second moment must be nonnegative")
    implied = mean_sigma2 - var_sigma
    tol = 1e-12 * max(1.0, abs(mean_sigma2))
    if implied < -tol:
        raise ValueError("inconsistent moments: E(sigma^2) < Var(sigma)")
    if mean_sigma is None:
        mean_sigma = float(np.sqrt(max(implied, 0.0)))
    elif abs(mean_sigma**2 - implied) > 1e-9 * max(1.0, abs(mean_sigma2)):
        raise ValueError("inconsistent moments: E(sigma)^2 != E(sigma^2) - Var(sigma)")
    if abs(cov_sigma) > var_sigma + tol:
        raise ValueError("inconsistent moments: |Cov| exceeds Var(sigma)")

    N = s.size
    lag = abs(int(n) - int(m)) % N
    s_bar = s.mean()
    sq = np.mean(s * s)
    lagged = np.roll(s, lag)
    cross = np.mean(s * lagged)
    cov_s = np.mean((s - s_bar) * (lagged - s_bar))
    var_s = np.mean((s - s_bar) ** 2)
    e2 = mean_sigma**2
    num = cov_sigma * cross + e2 * cov_s
    den = sq * (var_sigma + c * mean_sigma2) + e2 * var_s
    if den <= 0:
        raise ValueError("degenerate moments: zero variance of |r|")
    return float(num / den)
