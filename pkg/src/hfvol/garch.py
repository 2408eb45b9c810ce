"""
Gaussian quasi-maximum likelihood for MA(1)-GARCH(1,1) and GARCH(1,1).

Model::

    x_t      = u + theta * e_{t-1} + e_t
    h_t      = omega + alpha * e_{t-1}**2 + beta * h_{t-1}

Pre-sample values are ``e_0 = 0`` and ``h_1 = var(x)``. Both recursions are
linear given the residuals, so the likelihood, its analytic gradient and the
per-observation scores are computed with ``scipy.signal.lfilter``.

Estimation runs on ``x / sd(x)``; ``u`` and ``omega`` are mapped back by
``sd`` and ``sd**2``. The optimizer works on an unconstrained scale with
``omega, alpha, beta = exp(.)`` and ``theta = tanh(.)``; ``alpha + beta < 1``
is not imposed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import optimize, signal, stats

__all__ = [
    "Convergence",
    "GarchFit",
    "GarchOptions",
    "GarchParams",
    "PersistenceMetrics",
    "aggregation_law",
    "fit_garch11",
    "fit_ma1_garch11",
    "forecast_one_step",
    "garch_loglik",
    "garch_scores",
    "garch_variance",
    "ma1_residuals",
    "persistence",
]

LOG_2PI = math.log(2.0 * math.pi)
PARAM_NAMES = ("u", "theta", "omega", "alpha", "beta")


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float
    u: float = 0.0
    theta: float = 0.0

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise ValueError("omega must be > 0")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    def as_vector(self, names=PARAM_NAMES) -> np.ndarray:
        return np.array([getattr(self, k) for k in names], dtype=float)

    @classmethod
    def from_vector(cls, vec, names=PARAM_NAMES) -> GarchParams:
        values = dict(zip(names, map(float, vec)))
        return cls(**values)

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in PARAM_NAMES}


@dataclass(frozen=True)
class Convergence:
    status: str  # "converged" | "max_iter" | "failed"
    iterations: int
    grad_norm: float
    message: str

    @property
    def converged(self) -> bool:
        return self.status == "converged"


@dataclass(frozen=True)
class GarchOptions:
    gtol: float = 1e-6
    maxiter: int = 2000
    se: str = "opg"  # or "sandwich"
    start: GarchParams | None = None


@dataclass(frozen=True)
class PersistenceMetrics:
    persistence: float
    half_life: float
    mean_lag: float
    unit: str = "periods"

    def as_dict(self) -> dict[str, float | str]:
        return asdict(self)


@dataclass(frozen=True)
class GarchFit:
    """Result of a quasi-likelihood fit.

    ``stderr`` follows ``se_type``; both covariance estimates are kept in
    ``cov_opg`` and ``cov_sandwich`` (ordered as ``names``).
    """

    params: GarchParams
    names: tuple[str, ...]
    stderr: dict[str, float]
    tstat: dict[str, float]
    se_type: str
    cov_opg: np.ndarray
    cov_sandwich: np.ndarray
    loglik: float
    loglik_initial: float
    cond_var: np.ndarray
    residuals: np.ndarray
    std_residuals: np.ndarray
    convergence: Convergence
    presample: dict[str, float] = field(default_factory=dict)

    @property
    def n_obs(self) -> int:
        return int(self.residuals.size)

    @property
    def converged(self) -> bool:
        return self.convergence.converged

    @property
    def model(self) -> str:
        return "ma1-garch11" if "u" in self.names else "garch11"

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "n_obs": self.n_obs,
            "params": self.params.as_dict(),
            "free_params": list(self.names),
            "stderr": dict(self.stderr),
            "tstat": dict(self.tstat),
            "se_type": self.se_type,
            "loglik": self.loglik,
            "loglik_initial": self.loglik_initial,
            "convergence": asdict(self.convergence),
            "presample": dict(self.presample),
            "persistence": persistence(self.params).as_dict(),
        }


# ----------------------------------------------------------------------------
# recursions


def ma1_residuals(x, u: float, theta: float) -> np.ndarray:
    """``e_t = x_t - u - theta * e_{t-1}`` with ``e_0 = 0``."""
    x = np.asarray(x, dtype=float)
    return signal.lfilter([1.0], [1.0, theta], x - u)


def garch_variance(e, omega: float, alpha: float, beta: float, h1: float) -> np.ndarray:
    """``h_t = omega + alpha e_{t-1}^2 + beta h_{t-1}`` from ``h_1 = h1``."""
    e = np.asarray(e, dtype=float)
    h = np.empty(e.size)
    if e.size == 0:
        return h
    h[0] = h1
    if e.size > 1:
        drive = omega + alpha * e[:-1] ** 2
        h[1:], _ = signal.lfilter([1.0], [1.0, -beta], drive, zi=[beta * h1])
    return h


def _moments(x, vec, names, h1):
    p = dict(zip(names, vec))
    u = p.get("u", 0.0)
    theta = p.get("theta", 0.0)
    e = ma1_residuals(x, u, theta) if "u" in names else np.asarray(x, dtype=float)
    h = garch_variance(e, p["omega"], p["alpha"], p["beta"], h1)
    return p, e, h


def garch_loglik(x, params: GarchParams, h1: float | None = None, model: str = "ma1") -> np.ndarray:
    """Per-observation Gaussian log-likelihood contributions."""
    x = np.asarray(x, dtype=float)
    names = PARAM_NAMES if model == "ma1" else PARAM_NAMES[2:]
    if h1 is None:
        h1 = float(np.var(x, ddof=1))
    _, e, h = _moments(x, params.as_vector(names), names, h1)
    return -0.5 * (LOG_2PI + np.log(h) + e * e / h)


def _scores(x, vec, names, h1):
    """Per-observation log-likelihood and its gradient in natural parameters."""
    p, e, h = _moments(x, vec, names, h1)
    n = e.size
    k = len(names)
    alpha, beta = p["alpha"], p["beta"]
    de = np.zeros((n, k))
    if "u" in names:
        theta = p["theta"]
        iu, it = names.index("u"), names.index("theta")
        de[:, iu] = signal.lfilter([1.0], [1.0, theta], -np.ones(n))
        e_lag = np.concatenate(([0.0], e[:-1]))
        de[:, it] = signal.lfilter([1.0], [1.0, theta], -e_lag)
    drive = np.zeros((max(n - 1, 0), k))
    if n > 1:
        drive += 2.0 * alpha * e[:-1, None] * de[:-1]
        drive[:, names.index("omega")] += 1.0
        drive[:, names.index("alpha")] += e[:-1] ** 2
        drive[:, names.index("beta")] += h[:-1]
    dh = np.zeros((n, k))
    if n > 1:
        dh[1:] = signal.lfilter([1.0], [1.0, -beta], drive, axis=0)
    ratio = e * e / h
    ll = -0.5 * (LOG_2PI + np.log(h) + ratio)
    sc = -0.5 * (dh / h[:, None]) * (1.0 - ratio)[:, None] - (e / h)[:, None] * de
    return ll, sc, e, h


def garch_scores(x, params: GarchParams, h1: float | None = None, model: str = "ma1") -> np.ndarray:
    """Per-observation scores (n x k) in natural parameters ``u, theta, omega, alpha, beta``."""
    x = np.asarray(x, dtype=float)
    names = PARAM_NAMES if model == "ma1" else PARAM_NAMES[2:]
    if h1 is None:
        h1 = float(np.var(x, ddof=1))
    return _scores(x, params.as_vector(names), names, h1)[1]


# ----------------------------------------------------------------------------
# estimation


def _to_natural(z, names):
    out = np.empty_like(z)
    jac = np.empty_like(z)
    for i, name in enumerate(names):
        if name == "u":
            out[i], jac[i] = z[i], 1.0
        elif name == "theta":
            out[i] = math.tanh(z[i])
            jac[i] = 1.0 - out[i] ** 2
        else:
            out[i] = math.exp(min(z[i], 50.0))
            jac[i] = out[i]
    return out, jac


def _to_free(vec, names):
    z = np.empty(len(names))
    for i, name in enumerate(names):
        v = vec[i]
        if name == "u":
            z[i] = v
        elif name == "theta":
            z[i] = math.atanh(float(np.clip(v, -0.99, 0.99)))
        else:
            z[i] = math.log(max(v, 1e-8))
    return z


def _objective(z, x, names, h1):
    vec, jac = _to_natural(z, names)
    with np.errstate(all="ignore"):
        ll, sc, _, h = _scores(x, vec, names, h1)
        f = -ll.mean()
        g = -sc.mean(axis=0) * jac
    if not np.isfinite(f) or not np.all(np.isfinite(g)) or np.any(h <= 0):
        return np.inf, np.zeros_like(z)
    return f, g


def _numeric_hessian(x, vec, names, h1) -> np.ndarray:
    k = len(vec)
    H = np.empty((k, k))
    for i in range(k):
        step = 1e-5 * max(abs(vec[i]), 1e-3)
        up, dn = vec.copy(), vec.copy()
        up[i] += step
        dn[i] -= step
        g_up = _scores(x, up, names, h1)[1].sum(axis=0)
        g_dn = _scores(x, dn, names, h1)[1].sum(axis=0)
        H[:, i] = (g_up - g_dn) / (2 * step)
    return 0.5 * (H + H.T)


def _safe_inv(a: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(a)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(a)


def _fit(x, names, options: GarchOptions) -> GarchFit:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 100:
        raise ValueError(f"need at least 100 observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values in input series")
    sd = float(np.std(x, ddof=1))
    if sd == 0:
        raise ValueError("constant input series")
    xs = x / sd
    h1 = float(np.var(xs, ddof=1))

    if options.start is not None:
        s = options.start
        start = GarchParams(s.omega / sd**2, s.alpha, s.beta, s.u / sd, s.theta)
    else:
        start = GarchParams(0.05, 0.05, 0.90, u=float(xs.mean()), theta=0.0)
    vec0 = start.as_vector(names)
    z0 = _to_free(vec0, names)
    ll0 = float(_scores(xs, _to_natural(z0, names)[0], names, h1)[0].sum())

    best = None
    for z_init in (z0, _to_free(np.where(np.isin(names, ["beta"]), 0.6, vec0), names)):
        res = optimize.minimize(
            _objective,
            z_init,
            args=(xs, names, h1),
            jac=True,
            method="BFGS",
            options={"gtol": options.gtol, "maxiter": options.maxiter},
        )
        if best is None or res.fun < best.fun:
            best = res
        if res.success:
            break
    res = best
    z_hat = res.x
    vec, _ = _to_natural(z_hat, names)
    _, g_free = _objective(z_hat, xs, names, h1)
    gnorm = float(np.max(np.abs(g_free)))
    if gnorm <= options.gtol and np.isfinite(res.fun):
        status = "converged"
    elif res.nit >= options.maxiter:
        status = "max_iter"
    else:
        status = "failed"
    conv = Convergence(status, int(res.nit), gnorm, str(res.message))

    ll, sc, e, h = _scores(xs, vec, names, h1)
    opg = sc.T @ sc
    cov_opg = _safe_inv(opg)
    H = _numeric_hessian(xs, vec, names, h1)
    Hinv = _safe_inv(H)
    cov_sand = Hinv @ opg @ Hinv

    scale = np.array([{"u": sd, "omega": sd**2}.get(k, 1.0) for k in names])
    D = np.outer(scale, scale)
    cov_opg = cov_opg * D
    cov_sand = cov_sand * D
    nat = vec * scale
    values = {k: float(v) for k, v in zip(names, nat)}
    params = GarchParams(**values)
    cov = cov_opg if options.se == "opg" else cov_sand
    se = np.sqrt(np.clip(np.diag(cov), 0, None))
    stderr = dict(zip(names, se.tolist()))
    tstat = {k: (values[k] / stderr[k] if stderr[k] > 0 else float("nan")) for k in names}
    n = x.size
    return GarchFit(
        params=params,
        names=tuple(names),
        stderr=stderr,
        tstat=tstat,
        se_type=options.se,
        cov_opg=cov_opg,
        cov_sandwich=cov_sand,
        loglik=float(ll.sum()) - n * math.log(sd),
        loglik_initial=ll0 - n * math.log(sd),
        cond_var=h * sd**2,
        residuals=e * sd,
        std_residuals=e / np.sqrt(h),
        convergence=conv,
        presample={"e0": 0.0, "h1": h1 * sd**2},
    )


def fit_ma1_garch11(x, options: GarchOptions | None = None) -> GarchFit:
    """Fit MA(1)-GARCH(1,1) by Gaussian QML.

    Never silently returns a bad fit: inspect ``fit.convergence.status``.
    """
    return _fit(x, list(PARAM_NAMES), options or GarchOptions())


def fit_garch11(y, options: GarchOptions | None = None) -> GarchFit:
    """Fit zero-mean GARCH(1,1) (``u = theta = 0``) by Gaussian QML."""
    return _fit(y, list(PARAM_NAMES[2:]), options or GarchOptions())


def forecast_one_step(fit: GarchFit, x_new=None, horizon: int | None = None) -> np.ndarray:
    """Rolling one-step-ahead conditional variances after the fitted sample.

    The first forecast is ``omega + alpha e_T^2 + beta h_T``; later ones feed
    the recursion with the realized observations in ``x_new``. ``horizon``
    defaults to ``len(x_new) + 1`` and may not exceed it.
    """
    x_new = np.zeros(0) if x_new is None else np.asarray(x_new, dtype=float).ravel()
    max_h = x_new.size + 1
    if horizon is None:
        horizon = max_h
    if horizon < 1 or horizon > max_h:
        raise ValueError(f"horizon {horizon} needs data up to {horizon - 1} steps ahead")
    p = fit.params
    e_prev = float(fit.residuals[-1])
    h_prev = float(fit.cond_var[-1])
    out = np.empty(horizon)
    for j in range(horizon):
        h = p.omega + p.alpha * e_prev**2 + p.beta * h_prev
        out[j] = h
        if j < x_new.size:
            e_prev = x_new[j] - p.u - p.theta * e_prev
            h_prev = h
    return out


# ----------------------------------------------------------------------------
# persistence


def persistence(
    params: GarchParams | tuple[float, float],
    interval_minutes: float | None = None,
) -> PersistenceMetrics:
    """Half-life ``-ln 2 / ln(alpha + beta)`` and mean lag ``alpha / ((1-alpha)(1-beta))``.

    Both are infinite for ``alpha + beta >= 1``. With ``interval_minutes`` the
    metrics are converted from periods to minutes.
    """
    if isinstance(params, GarchParams):
        alpha, beta = params.alpha, params.beta
    else:
        alpha, beta = params
    p = alpha + beta
    if p >= 1:
        half, lag = math.inf, math.inf
    else:
        half = 0.0 if p == 0 else -math.log(2.0) / math.log(p)
        lag = alpha / (1.0 - alpha - beta + alpha * beta)
    unit = "periods"
    if interval_minutes is not None:
        half *= interval_minutes
        lag *= interval_minutes
        unit = "minutes"
    return PersistenceMetrics(p, half, lag, unit)


def aggregation_law(daily: GarchParams | float, t: float) -> float:
    """Implied persistence of the ``t``-period aggregated model, ``(alpha + beta)**t``."""
    p = daily.persistence if isinstance(daily, GarchParams) else float(daily)
    if p <= 0:
        raise ValueError("persistence must be > 0")
    return p**t


def aggregated_half_life(daily: GarchParams | float, t: float) -> float:
    """Half-life, in ``t``-period units, implied by the aggregation law."""
    p = aggregation_law(daily, t)
    return persistence((p, 0.0)).half_life


def pvalues(fit: GarchFit) -> dict[str, float]:
    return {k: float(2 * stats.norm.sf(abs(v))) for k, v in fit.tstat.items()}
