"""
Diagnostics: ARCH-LM test, EDF normality statistics with Monte-Carlo
critical values, and forecast-versus-realized correlation tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

__all__ = [
    "ArchLmResult",
    "CriticalValueTable",
    "EdfStats",
    "ForecastComparison",
    "STATISTICS",
    "arch_lm_batch",
    "arch_lm_test",
    "chi2_critical_value",
    "edf_from_uniform",
    "edf_statistics",
    "forecast_comparison",
    "mc_critical_values",
]

STATISTICS = ("D", "V", "W2", "U2", "A2")
LEVELS = (0.05, 0.025, 0.01)


def chi2_critical_value(level: float, df: int) -> float:
    """Upper-tail ``level`` quantile of chi-squared with ``df`` degrees of freedom."""
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    return float(stats.chi2.isf(level, df))


@dataclass(frozen=True)
class ArchLmResult:
    p: int
    TR2: float
    critical_value: float
    p_value: float
    reject: bool
    level: float
    n_effective: int


def _lag_design(x2: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Regressand ``x2[p:]`` and lag matrix (without intercept), batched on axis 0."""
    n = x2.shape[-1]
    y = x2[..., p:]
    lags = np.stack([x2[..., p - i : n - i] for i in range(1, p + 1)], axis=-1)
    return y, lags


def arch_lm_batch(X, p: int) -> np.ndarray:
    """``T R^2`` for each row of ``X`` (shape ``(reps, n)``)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1]
    if n <= p + 1:
        raise ValueError(f"need more than {p + 1} observations")
    y, lags = _lag_design(X * X, p)
    yc = y - y.mean(axis=1, keepdims=True)
    lc = lags - lags.mean(axis=1, keepdims=True)
    sxx = np.einsum("rti,rtj->rij", lc, lc)
    sxy = np.einsum("rti,rt->ri", lc, yc)
    syy = np.einsum("rt,rt->r", yc, yc)
    coef = np.linalg.solve(sxx, sxy[..., None])[..., 0]
    ssr = np.einsum("ri,ri->r", coef, sxy)
    return (n - p) * ssr / syy


def arch_lm_test(x, p: int = 2, level: float = 0.01) -> ArchLmResult:
    """Engle's LM test: regress ``x^2`` on ``p`` own lags and a constant.

    ``TR2 = (n - p) R^2`` is compared with the chi-squared(p) quantile.
    """
    x = np.asarray(x, dtype=float).ravel()
    if p < 1:
        raise ValueError("p must be >= 1")
    if x.size <= p + 1:
        raise ValueError(f"need more than {p + 1} observations, got {x.size}")
    y, lags = _lag_design(x * x, p)
    if np.ptp(y) == 0 or np.any(np.ptp(lags, axis=0) == 0):
        raise ValueError("degenerate regression: squared series has zero variance")
    design = np.column_stack([np.ones(y.size), lags])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    yc = y - y.mean()
    r2 = 1.0 - float(resid @ resid) / float(yc @ yc)
    r2 = min(max(r2, 0.0), 1.0)
    tr2 = y.size * r2
    crit = chi2_critical_value(level, p)
    pval = float(stats.chi2.sf(tr2, p))
    return ArchLmResult(p, tr2, crit, pval, tr2 > crit, level, int(y.size))


@dataclass(frozen=True)
class EdfStats:
    """EDF statistics for a normality test with estimated mean and variance.

    ``D`` and ``V`` are the raw formulas. ``D_scaled = sqrt(n) D`` and
    ``V_scaled = sqrt(n) V`` are the values compared with critical values;
    ``W2``, ``U2`` and ``A2`` are already on that scale.
    """

    Dplus: float
    Dminus: float
    D: float
    V: float
    W2: float
    U2: float
    A2: float
    n: int
    zbar: float

    @property
    def D_scaled(self) -> float:
        return float(np.sqrt(self.n) * self.D)

    @property
    def V_scaled(self) -> float:
        return float(np.sqrt(self.n) * self.V)

    def comparison(self) -> dict[str, float]:
        return {"D": self.D_scaled, "V": self.V_scaled, "W2": self.W2, "U2": self.U2, "A2": self.A2}

    def as_dict(self) -> dict[str, float]:
        return {
            "Dplus": self.Dplus,
            "Dminus": self.Dminus,
            "D": self.D,
            "V": self.V,
            "W2": self.W2,
            "U2": self.U2,
            "A2": self.A2,
            "D_scaled": self.D_scaled,
            "V_scaled": self.V_scaled,
            "n": self.n,
        }


def _edf_core(z: np.ndarray, log_z: np.ndarray, log_1mz: np.ndarray) -> dict[str, np.ndarray]:
    """Statistics along the last axis of sorted uniforms ``z``."""
    n = z.shape[-1]
    i = np.arange(1, n + 1)
    dplus = np.max(i / n - z, axis=-1)
    dminus = np.max(z - (i - 1) / n, axis=-1)
    w2 = np.sum((z - (2 * i - 1) / (2 * n)) ** 2, axis=-1) + 1.0 / (12 * n)
    zbar = np.mean(z, axis=-1)
    u2 = w2 - n * (zbar - 0.5) ** 2
    a2 = -np.sum((2 * i - 1) * (log_z + log_1mz[..., ::-1]), axis=-1) / n - n
    return {
        "Dplus": dplus,
        "Dminus": dminus,
        "D": np.maximum(dplus, dminus),
        "V": dplus + dminus,
        "W2": w2,
        "U2": u2,
        "A2": a2,
        "zbar": zbar,
    }


def _standardize(x: np.ndarray):
    n = x.shape[-1]
    mean = x.mean(axis=-1, keepdims=True)
    sd = np.sqrt(np.sum((x - mean) ** 2, axis=-1, keepdims=True) / (n - 1))
    return np.sort((x - mean) / sd, axis=-1), sd


def _wrap(d: dict, n: int) -> EdfStats:
    return EdfStats(
        Dplus=float(d["Dplus"]),
        Dminus=float(d["Dminus"]),
        D=float(d["D"]),
        V=float(d["V"]),
        W2=float(d["W2"]),
        U2=float(d["U2"]),
        A2=float(d["A2"]),
        n=n,
        zbar=float(d["zbar"]),
    )


def edf_from_uniform(z) -> EdfStats:
    """Statistics from probability-integral values ``z`` in (0, 1)."""
    z = np.sort(np.asarray(z, dtype=float).ravel())
    if z.size < 1 or np.any(z <= 0) or np.any(z >= 1):
        raise ValueError("z values must lie strictly inside (0, 1)")
    return _wrap(_edf_core(z, np.log(z), np.log1p(-z)), z.size)


def edf_statistics(x) -> EdfStats:
    """EDF normality statistics with ``z_i = Phi((x_i - xbar) / s)``, ``s`` with ``n - 1``.

    Raises
    ------
    ValueError
        If ``n < 8`` or the sample has zero spread.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 8:
        raise ValueError("need at least 8 observations")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values in sample")
    if np.ptp(x) == 0:
        raise ValueError("zero sample standard deviation")
    u, _ = _standardize(x)
    z = special.ndtr(u)
    return _wrap(_edf_core(z, special.log_ndtr(u), special.log_ndtr(-u)), x.size)


@dataclass(frozen=True)
class CriticalValueTable:
    values: dict[str, tuple[float, float, float]]
    levels: tuple[float, ...]
    n: int
    reps: int
    seed: int

    def __post_init__(self) -> None:
        for name, row in self.values.items():
            if np.any(np.diff(row) < 0):
                raise ValueError(f"critical values for {name} not increasing")

    def rows(self):
        for name in STATISTICS:
            yield (name, *self.values[name])


def mc_critical_values(
    n: int = 1000,
    reps: int = 100_000,
    seed: int = 0,
    batch: int = 5000,
    levels: tuple[float, ...] = LEVELS,
) -> CriticalValueTable:
    """Upper-tail Monte-Carlo critical values of the comparison-scale statistics.

    Each replication draws ``n`` standard normals and re-estimates mean and
    variance. Batches use independent ``SeedSequence`` children, so the
    table depends only on ``(n, reps, seed, batch)``.
    """
    if reps < 10_000:
        raise ValueError("reps must be >= 10000")
    if n < 8:
        raise ValueError("n must be >= 8")
    sizes = [batch] * (reps // batch) + ([reps % batch] if reps % batch else [])
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    out = {k: [] for k in STATISTICS}
    root_n = np.sqrt(n)
    for size, child in zip(sizes, children):
        x = np.random.default_rng(child).standard_normal((size, n))
        u, _ = _standardize(x)
        d = _edf_core(special.ndtr(u), special.log_ndtr(u), special.log_ndtr(-u))
        out["D"].append(d["D"] * root_n)
        out["V"].append(d["V"] * root_n)
        for k in ("W2", "U2", "A2"):
            out[k].append(d[k])
    q = [1.0 - lv for lv in levels]
    values = {k: tuple(float(v) for v in np.quantile(np.concatenate(out[k]), q)) for k in STATISTICS}
    return CriticalValueTable(values, tuple(levels), n, reps, seed)


@dataclass(frozen=True)
class ForecastComparison:
    """Rows of ``(measure, corr, p_value, corr_sq, p_value_sq)``."""

    rows: tuple[tuple[str, float, float, float, float], ...]

    def corr(self, measure: str) -> float:
        for row in self.rows:
            if row[0] == measure:
                return row[1]
        raise KeyError(measure)


def _pearson(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValueError("correlation undefined: a series has zero variance")
    res = stats.pearsonr(a, b)
    return float(res.statistic), float(res.pvalue)


def forecast_comparison(sigma_hat, measures: dict[str, np.ndarray]) -> ForecastComparison:
    """Correlate volatility forecasts with ex-post daily measures.

    All series are scaled to mean one. For each measure ``m`` the table has
    ``corr(sigma_hat, m)`` and ``corr(sigma_hat^2, m^2)`` with two-sided
    p-values.
    """
    s = np.asarray(sigma_hat, dtype=float).ravel()
    if s.size < 3:
        raise ValueError("need at least 3 days")
    if np.mean(s) <= 0:
        raise ValueError("forecasts must have positive mean")
    s = s / s.mean()
    rows = []
    for name, m in measures.items():
        m = np.asarray(m, dtype=float).ravel()
        if m.size != s.size:
            raise ValueError(f"{name}: length {m.size} does not match {s.size} forecasts")
        mean = m.mean()
        if mean == 0:
            raise ValueError(f"{name}: zero mean, cannot normalize")
        m = m / mean
        c, p = _pearson(s, m)
        c2, p2 = _pearson(s * s, m * m)
        rows.append((name, c, p, c2, p2))
    return ForecastComparison(tuple(rows))
