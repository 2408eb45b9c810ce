"""Acceptance criteria, one test per criterion (some split in parts).

Every test prints a ``PASS``/``FAIL`` line at the criterion's tolerance; the
lines are repeated in the pytest terminal summary. Parts known to be out of
reach at the stated design are marked ``xfail(strict=True)``: they run and
assert at full tolerance, and the ledger holds the analysis.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from hfvol.aggregate import aggregate, daily_returns, realized_measures
from hfvol.cli import run
from hfvol.diagnostics import (
    arch_lm_batch,
    chi2_critical_value,
    edf_statistics,
    forecast_comparison,
    mc_critical_values,
)
from hfvol.garch import GarchParams, fit_garch11, fit_ma1_garch11, persistence
from hfvol.mcmodel import PipelineOptions, fit_pipeline, normalized_returns
from hfvol.periodicity import estimate_periodicity_grid, estimate_periodicity_irregular
from hfvol.simulate import Arrivals, SimConfig, SProfile, export_truth, simulate, simulate_daily
from hfvol.stats import acf
from hfvol.ticktape import DEFAULT_CLOSE, DEFAULT_OPEN

from conftest import ACCEPTANCE_LINES

TABULATED_CV = {
    "D": (0.895, 0.955, 1.035),
    "V": (1.489, 1.585, 1.693),
    "W2": (0.126, 0.148, 0.178),
    "U2": (0.116, 0.136, 0.163),
    "A2": (0.787, 0.918, 1.092),
}
DAILY_TRUTH = GarchParams(1.69e-6, 0.104926, 0.873353, u=0.000272, theta=-0.06674)


def verdict(tag: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {tag}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def true_window_s2(profile: SProfile, starts, ends):
    length = DEFAULT_CLOSE - DEFAULT_OPEN
    tau0 = (np.asarray(starts) - DEFAULT_OPEN) / length
    tau1 = (np.asarray(ends) - DEFAULT_OPEN) / length
    return profile.mean_over(tau0, tau1) / (length / 1e6 * profile.mean_over(0.0, 1.0))


def rel_rmse(est, truth) -> float:
    return float(np.sqrt(np.mean((np.asarray(est) / truth - 1) ** 2)))


# ----------------------------------------------------------------------------
# closed forms


def test_c1_persistence_formulas():
    m = persistence((0.148918, 0.791006), interval_minutes=78)
    ok = abs(m.half_life / 872.637 - 1) < 1e-3 and abs(m.mean_lag / 65.3034 - 1) < 1e-3
    assert verdict("1", ok, f"half-life {m.half_life:.4f} min, mean lag {m.mean_lag:.5f} min")


def test_c2_acf_bounds():
    rng = np.random.default_rng(0)
    b1 = acf(rng.standard_normal(19656), 1).bound
    b2 = acf(rng.standard_normal(9828), 1).bound
    ok = abs(b1 - 0.01426535) < 1e-8 and abs(b2 - 0.020174251) < 1e-8
    assert verdict("2", ok, f"bounds {b1:.9f}, {b2:.9f}")


def test_c3_arch_lm_value_and_size():
    cv = chi2_critical_value(0.01, 2)
    reps, n, batch = 100_000, 1000, 5000
    children = np.random.SeedSequence(3).spawn(reps // batch)
    rejections = 0
    for child in children:
        x = np.random.default_rng(child).standard_normal((batch, n))
        rejections += int(np.sum(arch_lm_batch(x, 2) > cv))
    rate = rejections / reps
    ok = f"{cv:.9f}" == "9.210340372" and abs(rate - 0.01) <= 0.003
    assert verdict("3", ok, f"critical value {cv:.9f}, size {rate:.4%} over {reps} reps")


# ----------------------------------------------------------------------------
# EDF table


@pytest.fixture(scope="module")
def edf_table():
    return mc_critical_values(n=1000, reps=100_000, seed=2024)


def _cells(table, keys):
    worst = 0.0
    for k in keys:
        for got, want in zip(table.values[k], TABULATED_CV[k]):
            worst = max(worst, abs(got - want))
    return worst


def test_c4_edf_table_d_v_w2_u2(edf_table):
    keys = ("D", "V", "W2", "U2")
    worst = _cells(edf_table, keys)
    shown = "; ".join(f"{k} " + "/".join(f"{v:.3f}" for v in edf_table.values[k]) for k in keys)
    assert verdict("4 (D, V, W2, U2)", worst <= 0.03, f"max deviation {worst:.4f}; {shown}")


@pytest.mark.xfail(strict=True, reason="ledger, criterion 4 A2 row: tabulated values sit above a correct MC at n=1000")
def test_c4_edf_table_a2(edf_table):
    worst = _cells(edf_table, ("A2",))
    shown = "/".join(f"{v:.3f}" for v in edf_table.values["A2"])
    assert verdict("4 (A2)", worst <= 0.03, f"max deviation {worst:.4f}; A2 {shown} vs 0.787/0.918/1.092")


# ----------------------------------------------------------------------------
# aggregation law


def test_c5_aggregation_law():
    truth = GarchParams(1.69e-6, 0.104926, 0.978 - 0.104926)
    n, reps = 5000, 500
    X, _ = simulate_daily(truth, n, seed=5, reps=reps)
    est = {1: [], 2: [], 5: []}
    for x in X:
        for t in est:
            summed = x[: n // t * t].reshape(-1, t).sum(axis=1)
            est[t].append(fit_garch11(summed).params.persistence)
    parts, ok = [], True
    for t, values in est.items():
        v = np.asarray(values)
        target = 0.978**t
        ok &= abs(v.mean() - target) <= 2 * v.std(ddof=1)
        parts.append(f"t={t}: mean {v.mean():.4f} vs {target:.4f} (sd {v.std(ddof=1):.4f})")
    assert verdict("5", ok, "; ".join(parts))


# ----------------------------------------------------------------------------
# periodicity recovery


@pytest.fixture(scope="module")
def periodicity_sim():
    return simulate(SimConfig(days=252, arrivals=Arrivals("poisson", 0.5), seed=606))


@pytest.mark.xfail(strict=True, reason="ledger, criterion 6 grid part: 252 days put the sampling floor near 8.9%")
def test_c6_grid_rmse(periodicity_sim):
    series = aggregate(periodicity_sim.tape, "time:300")
    prof = estimate_periodicity_grid(series, periodicity_sim.sigma)
    truth = true_window_s2(periodicity_sim.config.s_profile, prof.starts, prof.ends)
    rmse = rel_rmse(prof.s2, truth)
    floor = math.sqrt(2 / len(series.days))
    assert verdict("6 (grid)", rmse < 0.05, f"relative RMSE {rmse:.2%} over 78 cells (chi-squared floor {floor:.2%})")


def test_c6_irregular_rmse(periodicity_sim):
    ref = aggregate(periodicity_sim.tape, "txn:400").days[0]
    prof = estimate_periodicity_irregular(ref.boundaries, periodicity_sim.tape, periodicity_sim.sigma)
    truth = true_window_s2(periodicity_sim.config.s_profile, prof.starts, prof.ends)
    rmse = rel_rmse(prof.s2, truth)
    assert verdict("6 (irregular)", rmse < 0.10, f"relative RMSE {rmse:.2%} over {prof.s2.size} txn:400 windows")


def test_c6_irregular_equals_grid(periodicity_sim):
    series = aggregate(periodicity_sim.tape, "time:300")
    grid = estimate_periodicity_grid(series, periodicity_sim.sigma)
    edges = estimate_periodicity_irregular(
        series.days[0].boundaries, periodicity_sim.tape, periodicity_sim.sigma, method="edges"
    )
    gap = float(np.max(np.abs(edges.s2 / grid.s2 - 1)))
    assert verdict("6 (equality)", gap <= 1e-10, f"max relative gap {gap:.2e} on coinciding windows")


# ----------------------------------------------------------------------------
# filtering effect


def test_c7_filtering_removes_cycle():
    out = simulate(SimConfig(days=252, arrivals=Arrivals("grid", 60.0), seed=707))
    fit = fit_pipeline(out.tape, "time:300", options=PipelineOptions(gmm=False))
    y = np.vstack(fit.filtered.y)
    norm = np.vstack([d.returns for d in normalized_returns(fit.series, fit.sigma).days])
    filtered_ratio = float(np.max(np.mean(y * y, 0)) / np.min(np.mean(y * y, 0)))
    norm_var = np.mean(norm * norm, axis=0)
    normalized_ratio = float(norm_var.max() / norm_var.min())
    # five-day correlogram of |y|: lags of one day against their neighbours
    corr_y = acf(np.abs(fit.filtered.values), 5 * 78).values
    corr_n = acf(np.abs(normalized_returns(fit.series, fit.sigma).values), 5 * 78).values
    ok = filtered_ratio < 1.15 and normalized_ratio > 1.5
    assert verdict(
        "7",
        ok,
        f"per-interval variance max/min filtered {filtered_ratio:.3f}, normalized {normalized_ratio:.2f}; "
        f"lag-78 |acf| filtered {corr_y[77]:.3f}, normalized {corr_n[77]:.3f}",
    )


# ----------------------------------------------------------------------------
# persistence across schemes


def test_c8_persistence_falls_with_interval():
    reps, grids = 200, (30, 300, 600, 1800)
    monotone, fitted = 0, []
    for rep in range(reps):
        cfg = SimConfig(days=252, arrivals=Arrivals("grid", 30.0), intraday_garch=(0.01, 0.08, 0.91), seed=500 + rep)
        out = simulate(cfg)
        ps = [
            fit_pipeline(out.tape, f"time:{g}", options=PipelineOptions(gmm=False)).intraday_fit.params.persistence
            for g in grids
        ]
        fitted.append(ps)
        monotone += bool(np.all(np.diff(ps) < 0))
    share = monotone / reps
    means = "/".join(f"{v:.3f}" for v in np.mean(fitted, axis=0))
    assert verdict("8", share >= 0.90, f"{share:.1%} of {reps} reps decreasing; mean persistence {means}")


# ----------------------------------------------------------------------------
# QMLE recovery


def test_c9_qmle_recovery():
    reps = 300
    X, _ = simulate_daily(DAILY_TRUTH, 2500, seed=9, reps=reps)
    truth = DAILY_TRUTH.as_dict()
    hits = 0
    for x in X:
        fit = fit_ma1_garch11(x)
        est = fit.params.as_dict()
        hits += all(abs(est[k] - truth[k]) <= 3 * fit.stderr[k] for k in fit.names)
    share = hits / reps
    assert verdict("9", share >= 0.93, f"{share:.1%} of {reps} reps with every parameter within 3 SE")


# ----------------------------------------------------------------------------
# GMM coverage


def test_c10_gmm_coverage():
    reps, (omega, alpha, beta) = 500, (0.05, 0.05, 0.90)
    covered = []
    for rep in range(reps):
        cfg = SimConfig(days=252, arrivals=Arrivals("grid", 300.0), intraday_garch=(omega, alpha, beta), seed=1000 + rep)
        out = simulate(cfg)
        gmm = fit_pipeline(out.tape, "time:300", sigma=out.sigma).gmm
        truth = np.concatenate([out.truth[0].s ** 2, [omega, alpha, beta]])
        covered.append(np.abs(gmm.estimate - truth) <= 1.96 * gmm.stderr)
    covered = np.asarray(covered)
    rate = float(covered.mean())
    theta = "/".join(f"{v:.3f}" for v in covered[:, -3:].mean(axis=0))
    assert verdict("10", abs(rate - 0.95) <= 0.03, f"pooled 95% coverage {rate:.3f}; omega/alpha/beta {theta}")


# ----------------------------------------------------------------------------
# forecast vs realized


def test_c11_forecast_orders_realized_above_abs_return():
    reps, wins = 200, 0
    for rep in range(reps):
        out = simulate(SimConfig(days=252, arrivals=Arrivals("grid", 60.0), seed=77 + rep))
        R = out.daily_returns
        sigma_hat = np.sqrt(fit_ma1_garch11(R).cond_var)
        rv = np.array([math.sqrt(realized_measures(d)[0]) for d in aggregate(out.tape, "tick").days])
        table = forecast_comparison(sigma_hat, {"abs_R": np.abs(R), "rv": rv})
        wins += table.corr("rv") > table.corr("abs_R")
    share = wins / reps
    assert verdict("11", share >= 0.95, f"{share:.1%} of {reps} reps with corr(rv) > corr(|R|)")


# ----------------------------------------------------------------------------
# identities


def test_c12_exact_identities(tmp_path):
    out = simulate(SimConfig(days=30, arrivals=Arrivals("poisson", 0.2), seed=1212))
    R = daily_returns(out.tape)
    tele = 0.0
    for scheme in ("time:300", "tick"):
        sums = np.array([d.returns.sum() for d in aggregate(out.tape, scheme).days])
        tele = max(tele, float(np.max(np.abs(sums - R))))
    norm = max(abs(float(np.sum(t.w * t.s**2)) - 1) for t in out.truth)
    edf = edf_statistics(out.truth[0].z[:500])
    d_max = edf.D == max(edf.Dplus, edf.Dminus)
    u2 = abs(edf.U2 - (edf.W2 - edf.n * (edf.zbar - 0.5) ** 2))

    again = simulate(out.config)
    sim_same = all(
        a.times.tobytes() == b.times.tobytes() and a.prices.tobytes() == b.prices.tobytes()
        for a, b in zip(out.tape.days, again.tape.days)
    )
    tape_csv = export_truth(out, tmp_path / "sim")["tape"]
    codes = [run(["pipeline", "--in", str(tape_csv), "--out", str(tmp_path / d)]) for d in ("a", "b")]
    names = ("daily_fit.json", "profile.csv", "filtered.csv", "intraday_fit.json", "gmm_cov.csv")
    pipe_same = codes == [0, 0] and all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)

    ok = tele <= 1e-12 and norm <= 1e-12 and d_max and u2 <= 1e-12 and sim_same and pipe_same
    assert verdict(
        "12",
        ok,
        f"telescoping {tele:.1e}, sum w s2 {norm:.1e}, D = max {d_max}, U2 gap {u2:.1e}, "
        f"simulate bitwise {sim_same}, pipeline bitwise {pipe_same}",
    )
