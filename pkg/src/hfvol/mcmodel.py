"""
Two-step estimation of the multiplicative component model.

Step one fits an MA(1)-GARCH(1,1) to daily returns and estimates the
intraday periodicity; step two fits a GARCH(1,1) to the filtered returns
``y = r / (sqrt(w) sigma_t s)``. The joint covariance of the periodicity and
intraday GARCH estimates stacks both steps as moment conditions::

    g1 = N e_n (r^2 / (w sigma^2) - psi_n)       periodicity, per grid cell
    g2 = d/dtheta [-(log h + y^2 / h) / 2]       intraday GARCH score

and uses ``G^-1 Lambda G^-T / M``.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from hfvol.aggregate import DayReturns, ReturnSeries, Scheme, aggregate, daily_returns
from hfvol.garch import GarchFit, GarchOptions, GarchParams, fit_garch11, fit_ma1_garch11, garch_scores
from hfvol.periodicity import (
    FilteredSeries,
    PeriodicityProfile,
    estimate_periodicity_grid,
    estimate_periodicity_series,
    filter_returns,
)
from hfvol.ticktape import DEFAULT_CLOSE, DEFAULT_OPEN, TickTape

__all__ = [
    "GmmPieces",
    "McFit",
    "PipelineError",
    "PipelineOptions",
    "fit_pipeline",
    "gmm_covariance",
    "gmm_sandwich",
    "normalized_returns",
    "bartlett_lags",
    "outer_product_average",
    "stacked_moments",
]

MIN_DAILY_FIT = 100


class PipelineError(ValueError):
    """Failure inside one pipeline stage; ``stage`` names it."""

    def __init__(self, stage: str, message: str) -> None:
        self.stage = stage
        super().__init__(f"{stage}: {message}")


@dataclass(frozen=True)
class PipelineOptions:
    """Settings for :func:`fit_pipeline`.

    Attributes
    ----------
    daily_model : {"auto", "garch", "constant"}
        ``auto`` fits MA(1)-GARCH(1,1) with at least 100 days and falls back
        to a constant daily volatility otherwise.
    irregular_method : {"ticks", "edges"}
        Window estimator for transaction and tick schemes.
    gmm : bool
        Compute the joint covariance (clock-time grids only).
    cluster : {"day", "observation"}
        Grouping of moment contributions in ``Lambda``.
    """

    session: tuple[int, int] = (DEFAULT_OPEN, DEFAULT_CLOSE)
    daily_model: str = "auto"
    irregular_method: str = "ticks"
    garch: GarchOptions = field(default_factory=GarchOptions)
    gmm: bool = True
    cluster: str = "day"
    fd_step: float = 1e-4
    threads: int | None = None

    def __post_init__(self) -> None:
        if self.daily_model not in ("auto", "garch", "constant"):
            raise ValueError(f"unknown daily_model {self.daily_model!r}")
        if self.cluster not in ("day", "observation"):
            raise ValueError(f"unknown cluster {self.cluster!r}")


@dataclass(frozen=True)
class GmmPieces:
    """Stacked-moment pieces and the resulting covariance.

    ``names`` orders ``psi_1..psi_N, omega, alpha, beta``. ``cov`` is on the
    natural scale, ``cov_log`` on the log scale used for ``G``.
    """

    names: tuple[str, ...]
    estimate: np.ndarray
    g1_M: np.ndarray
    g2_M: np.ndarray
    G: np.ndarray
    Lambda: np.ndarray
    M: int
    cov_log: np.ndarray
    cov: np.ndarray
    condition: float

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0, None))


@dataclass(frozen=True)
class McFit:
    series: ReturnSeries
    daily: np.ndarray
    daily_fit: GarchFit | None
    sigma: np.ndarray
    profile: PeriodicityProfile | dict[dt.date, PeriodicityProfile]
    filtered: FilteredSeries
    intraday_fit: GarchFit
    gmm: GmmPieces | None
    daily_model: str

    @property
    def daily_params(self) -> GarchParams | None:
        return None if self.daily_fit is None else self.daily_fit.params


def normalized_returns(series: ReturnSeries, sigma) -> ReturnSeries:
    """Returns divided by their day's volatility, ``r / sigma_t``."""
    sig = np.asarray(sigma, dtype=float).ravel()
    if sig.size != len(series.days):
        raise ValueError(f"need {len(series.days)} daily volatilities, got {sig.size}")
    if not np.all(np.isfinite(sig)) or np.any(sig <= 0):
        raise ValueError("daily volatilities must be finite and > 0")
    days = [DayReturns(d.date, d.returns / s, d.boundaries) for d, s in zip(series.days, sig)]
    return ReturnSeries(tuple(days), series.scheme, series.session)


def outer_product_average(g, clusters=None, lags: int = 0) -> np.ndarray:
    """``(1/M) sum_c S_c S_c^T`` with ``S_c`` the cluster sums of rows of ``g``.

    Clusters are taken in sorted label order. With ``lags > 0`` Bartlett
    weighted cross products of cluster sums up to ``lags`` apart are added
    (Newey-West), for moments that stay correlated across clusters.
    """
    g = np.atleast_2d(np.asarray(g, dtype=float))
    M = g.shape[0]
    if clusters is not None:
        labels, inv = np.unique(np.asarray(clusters), return_inverse=True)
        sums = np.zeros((labels.size, g.shape[1]))
        np.add.at(sums, inv, g)
        g = sums
    out = g.T @ g
    for j in range(1, min(int(lags), g.shape[0] - 1) + 1):
        cross = g[j:].T @ g[:-j]
        out += (1.0 - j / (lags + 1.0)) * (cross + cross.T)
    return out / M


def bartlett_lags(n_clusters: int) -> int:
    """Newey-West rule of thumb ``floor(4 (n / 100)^(2/9))``."""
    return int(np.floor(4.0 * (n_clusters / 100.0) ** (2.0 / 9.0)))


def gmm_sandwich(G: np.ndarray, Lambda: np.ndarray, M: int) -> tuple[np.ndarray, float]:
    """``G^-1 Lambda G^-T / M`` and the condition number of ``G``."""
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond) or cond > 1e12:
        raise np.linalg.LinAlgError(f"moment Jacobian is singular (condition number {cond:.3g})")
    Ginv = np.linalg.inv(G)
    cov = Ginv @ Lambda @ Ginv.T / M
    return (cov + cov.T) / 2, cond


def _grid_arrays(series: ReturnSeries, sigma):
    if series.scheme.kind != "time" or not series.is_regular_grid():
        raise ValueError("joint covariance needs returns on a shared clock grid")
    sig = np.asarray(sigma, dtype=float).ravel()
    if sig.size != len(series.days):
        raise ValueError("sigma does not match the series days")
    r = np.vstack([d.returns for d in series.days])
    w = series.days[0].durations
    return r / (np.sqrt(w)[None, :] * sig[:, None])


def stacked_moments(u: np.ndarray, psi, theta) -> np.ndarray:
    """Per-observation moments ``[g1, g2]`` (shape ``(T N, N + 3)``), day-major.

    ``u`` holds ``r / (sqrt(w) sigma)`` with shape ``(T, N)``.
    """
    u = np.asarray(u, dtype=float)
    psi = np.asarray(psi, dtype=float)
    T, N = u.shape
    x = u * u
    y = (u / np.sqrt(psi)[None, :]).ravel()
    g1 = np.zeros((T * N, N))
    g1[np.arange(T * N), np.tile(np.arange(N), T)] = N * (x - psi[None, :]).ravel()
    h1 = float(np.var(y, ddof=1))
    g2 = garch_scores(y, GarchParams(*theta), h1=h1, model="garch")
    return np.hstack([g1, g2])


def gmm_covariance(
    series: ReturnSeries,
    sigma,
    psi,
    theta,
    cluster: str = "day",
    step: float = 1e-4,
    lags: int | None = None,
) -> GmmPieces:
    """Joint covariance of periodicity and intraday GARCH estimates.

    Parameters
    ----------
    series : ReturnSeries
        Clock-time returns on a shared grid.
    sigma : array_like
        Daily volatility per day.
    psi : array_like
        Periodicity estimates before normalization (cell means of
        ``r^2 / (w sigma^2)``).
    theta : sequence of float
        ``(omega, alpha, beta)`` for ``y = r / (sqrt(w) sigma sqrt(psi))``.
    cluster : {"day", "observation"}
        ``day`` sums moments within each day before the outer products.
    step : float
        Central-difference step on the log-parameter scale.
    lags : int, optional
        Bartlett lags across days for ``day`` clustering; defaults to
        :func:`bartlett_lags`. Ignored for ``observation``.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the moment Jacobian is numerically singular.
    """
    u = _grid_arrays(series, sigma)
    T, N = u.shape
    psi = np.asarray(psi, dtype=float).ravel()
    theta = np.asarray(theta, dtype=float).ravel()
    if psi.size != N or theta.size != 3:
        raise ValueError("need one psi per grid cell and three GARCH parameters")
    if np.any(psi <= 0) or np.any(theta <= 0):
        raise ValueError("psi and theta must be strictly positive for the log-scale Jacobian")
    est = np.concatenate([psi, theta])
    def moments(vec):
        return stacked_moments(u, vec[:N], vec[N:])

    g = moments(est)
    gbar = g.mean(axis=0)
    eta = np.log(est)
    k = est.size
    G = np.empty((k, k))
    for j in range(k):
        up, dn = eta.copy(), eta.copy()
        up[j] += step
        dn[j] -= step
        G[:, j] = (moments(np.exp(up)).mean(axis=0) - moments(np.exp(dn)).mean(axis=0)) / (2 * step)
    G[:N, N:] = 0.0  # periodicity moments do not involve theta
    M = T * N
    if cluster == "day":
        lags = bartlett_lags(T) if lags is None else int(lags)
        Lam = outer_product_average(g, np.repeat(np.arange(T), N), lags)
    elif cluster == "observation":
        Lam = outer_product_average(g)
    else:
        raise ValueError(f"unknown cluster {cluster!r}")
    cov_log, cond = gmm_sandwich(G, Lam, M)
    J = np.diag(est)
    cov = J @ cov_log @ J
    names = tuple(f"psi_{i + 1}" for i in range(N)) + ("omega", "alpha", "beta")
    return GmmPieces(names, est, gbar[:N], gbar[N:], G, Lam, M, cov_log, (cov + cov.T) / 2, cond)


def _daily_stage(daily: np.ndarray, options: PipelineOptions):
    mode = options.daily_model
    if mode == "auto":
        mode = "garch" if daily.size >= MIN_DAILY_FIT else "constant"
    if mode == "constant":
        if daily.size < 2:
            raise PipelineError("daily", "need at least 2 days for a volatility estimate")
        sd = float(np.sqrt(np.mean(daily * daily)))
        if sd == 0:
            raise PipelineError("daily", "daily returns are all zero")
        return None, np.full(daily.size, sd), "constant"
    try:
        fit = fit_ma1_garch11(daily, options.garch)
    except ValueError as exc:
        raise PipelineError("daily", str(exc)) from exc
    return fit, np.sqrt(fit.cond_var), "ma1-garch11"


def fit_pipeline(
    tape: TickTape,
    scheme: Scheme | str = "time:300",
    daily=None,
    options: PipelineOptions | None = None,
    sigma=None,
) -> McFit:
    """Run both estimation steps on a tape.

    Parameters
    ----------
    tape : TickTape
    scheme : Scheme or str
        Return construction for the intraday stage.
    daily : array_like, optional
        Daily returns aligned with the tape; first-to-last trade log returns
        by default.
    options : PipelineOptions, optional
    sigma : array_like, optional
        Known daily volatilities; skips the daily fit.
    """
    options = options or PipelineOptions()
    if isinstance(scheme, str):
        scheme = Scheme.parse(scheme)
    try:
        series = aggregate(tape, scheme, options.session)
    except ValueError as exc:
        raise PipelineError("aggregate", str(exc)) from exc
    daily = daily_returns(tape) if daily is None else np.asarray(daily, dtype=float).ravel()
    if daily.size != len(tape.days):
        raise PipelineError("daily", f"{daily.size} daily returns for {len(tape.days)} tape days")

    if sigma is not None:
        daily_fit, sig, model = None, np.asarray(sigma, dtype=float).ravel(), "given"
    else:
        daily_fit, sig, model = _daily_stage(daily, options)

    try:
        if scheme.kind == "time" and series.is_regular_grid():
            profile = estimate_periodicity_grid(series, sig)
        else:
            profile = estimate_periodicity_series(
                series, tape, sig, method=options.irregular_method, threads=options.threads
            )
        sig_series = _align_sigma(series, tape, sig)
        filtered = filter_returns(series, sig_series, profile)
    except ValueError as exc:
        raise PipelineError("periodicity", str(exc)) from exc

    try:
        intraday = fit_garch11(filtered.values, options.garch)
    except ValueError as exc:
        raise PipelineError("intraday", str(exc)) from exc

    gmm = None
    if options.gmm and isinstance(profile, PeriodicityProfile) and profile.source == "time_grid":
        p = intraday.params
        # params of the fit on y, expressed for y without the final rescale
        factor = filtered.scale**2 / float(np.sum(profile.durations * profile.raw))
        theta = (p.omega * factor, p.alpha, p.beta)
        try:
            gmm = gmm_covariance(series, sig_series, profile.raw, theta, options.cluster, options.fd_step)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise PipelineError("gmm", str(exc)) from exc
    return McFit(series, daily, daily_fit, sig, profile, filtered, intraday, gmm, model)


def _align_sigma(series: ReturnSeries, tape: TickTape, sig: np.ndarray) -> np.ndarray:
    index = {d: i for i, d in enumerate(tape.dates)}
    return np.array([sig[index[d]] for d in series.dates])
