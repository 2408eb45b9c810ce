import dataclasses
import math

import numpy as np
import pytest

from hfvol.garch import (
    GarchOptions,
    GarchParams,
    aggregated_half_life,
    aggregation_law,
    fit_garch11,
    fit_ma1_garch11,
    forecast_one_step,
    garch_loglik,
    garch_scores,
    garch_variance,
    ma1_residuals,
    persistence,
    pvalues,
)
from hfvol.simulate import DEFAULT_DAILY, simulate_daily

TRUTH = GarchParams(1.7e-6, 0.10, 0.87, u=0.0003, theta=-0.07)


@pytest.fixture(scope="module")
def daily_sample():
    x, h = simulate_daily(TRUTH, 2500, seed=42)
    return x, h, fit_ma1_garch11(x)


def test_params_validation():
    with pytest.raises(ValueError):
        GarchParams(0.0, 0.1, 0.8)
    with pytest.raises(ValueError):
        GarchParams(1.0, -0.1, 0.8)
    # non-stationary fits must stay representable
    assert GarchParams(1.0, 0.3, 0.775).persistence == pytest.approx(1.075)


def test_recovery_within_three_se(daily_sample):
    _, _, fit = daily_sample
    assert fit.converged
    for name in ("u", "theta", "omega", "alpha", "beta"):
        err = abs(getattr(fit.params, name) - getattr(TRUTH, name))
        assert err < 3 * fit.stderr[name], name


def test_fit_report_contents(daily_sample):
    x, _, fit = daily_sample
    assert fit.loglik >= fit.loglik_initial
    assert np.all(fit.cond_var > 0)
    assert fit.residuals.size == x.size == fit.n_obs
    assert fit.presample["e0"] == 0.0
    assert fit.presample["h1"] == pytest.approx(np.var(x, ddof=1), rel=1e-12)
    assert set(pvalues(fit)) == set(fit.names)
    doc = fit.to_dict()
    assert doc["convergence"]["status"] == "converged"
    assert doc["persistence"]["persistence"] == pytest.approx(fit.params.persistence)
    assert fit.loglik == pytest.approx(garch_loglik(x, fit.params).sum(), rel=1e-10)


def test_sandwich_option(daily_sample):
    x, _, fit = daily_sample
    sand = fit_ma1_garch11(x, GarchOptions(se="sandwich"))
    assert sand.se_type == "sandwich"
    np.testing.assert_allclose(np.sqrt(np.diag(fit.cov_sandwich)), list(sand.stderr.values()), rtol=1e-6)


def test_iid_input_gives_small_alpha():
    x = 0.01 * np.random.default_rng(7).standard_normal(3000)
    fit = fit_ma1_garch11(x)
    assert fit.params.alpha < 0.03
    assert np.mean(fit.cond_var) / np.var(x, ddof=1) == pytest.approx(1.0, abs=0.05)


def test_constant_variance_truth_recovers_unconditional_variance():
    p = GarchParams(4e-4, 0.0, 0.0)
    x, _ = simulate_daily(p, 4000, seed=3)
    fit = fit_garch11(x)
    pm = fit.params
    uncond = pm.omega / (1 - pm.alpha - pm.beta)
    # sd of a variance estimate from 4000 normals is sqrt(2/4000) = 2.2%
    assert uncond / p.omega == pytest.approx(1.0, abs=0.1)


def test_filtered_series_recovery():
    p = GarchParams(0.05, 0.05, 0.90)
    y, _ = simulate_daily(p, 20000, seed=8)
    fit = fit_garch11(y)
    for name in ("omega", "alpha", "beta"):
        assert abs(getattr(fit.params, name) - getattr(p, name)) < 3 * fit.stderr[name]
    assert fit.names == ("omega", "alpha", "beta")


def test_degenerate_recursion():
    e = np.random.default_rng(0).standard_normal(50)
    np.testing.assert_array_equal(garch_variance(e, 1.0, 0.0, 0.0, 1.0), np.ones(50))


def test_one_recursion_step():
    h = garch_variance(np.array([math.sqrt(2.0), 0.0]), 0.1, 0.2, 0.7, 1.0)
    assert h[1] == pytest.approx(1.2, abs=1e-15)


def test_ma1_residuals_invert_simulation():
    rng = np.random.default_rng(1)
    e = rng.standard_normal(200)
    x = 0.1 + e + 0.3 * np.concatenate(([0.0], e[:-1]))
    np.testing.assert_allclose(ma1_residuals(x, 0.1, 0.3), e, atol=1e-12)


def test_forecast_identities(daily_sample):
    x, _, fit = daily_sample
    p = fit.params
    first = forecast_one_step(fit)
    expected = p.omega + p.alpha * fit.residuals[-1] ** 2 + p.beta * fit.cond_var[-1]
    assert first[0] == pytest.approx(expected, rel=1e-14)
    flat = dataclasses.replace(fit, params=GarchParams(2e-4, 0.0, 0.0, u=p.u, theta=p.theta))
    np.testing.assert_array_equal(forecast_one_step(flat, x[:10]), np.full(11, 2e-4))
    with pytest.raises(ValueError):
        forecast_one_step(fit, x[:3], horizon=5)


def test_in_sample_path_is_one_step_forecast(daily_sample):
    x, _, fit = daily_sample
    # cut the fitted paths five steps early and roll forward with the realized data
    head = dataclasses.replace(fit, residuals=fit.residuals[:-5], cond_var=fit.cond_var[:-5])
    np.testing.assert_allclose(forecast_one_step(head, x[-5:-1]), fit.cond_var[-5:], rtol=1e-10)


def test_table12_78_minute_row():
    pm = persistence((0.148918, 0.791006), 78)
    assert pm.mean_lag == pytest.approx(65.3034, rel=1e-3)
    assert pm.half_life == pytest.approx(872.637, rel=1e-3)
    assert pm.unit == "minutes"


def test_nonstationary_is_infinite():
    pm = persistence((0.30, 0.775))
    assert math.isinf(pm.half_life)
    assert math.isinf(pm.mean_lag)


def test_zero_persistence():
    pm = persistence((0.0, 0.0))
    assert pm.half_life == 0.0
    assert pm.mean_lag == 0.0


def test_daily_half_life():
    # daily table estimates, alpha + beta = 0.978279
    assert persistence(DEFAULT_DAILY).half_life == pytest.approx(31.56, abs=0.01)


def test_aggregation_law():
    assert aggregation_law(0.9, 2) == pytest.approx(0.81, abs=1e-15)
    assert aggregation_law(0.9, 1) == 0.9
    with pytest.raises(ValueError):
        aggregation_law(0.0, 2)


@pytest.mark.parametrize("t", [1, 2, 5, 22, 2.5])
def test_half_life_aggregation_identity(t):
    base = persistence(DEFAULT_DAILY).half_life
    assert aggregated_half_life(DEFAULT_DAILY, t) * t == pytest.approx(base, rel=1e-10)


def test_scale_equivariance(daily_sample):
    x, _, fit = daily_sample
    a = 37.0
    big = fit_ma1_garch11(a * x)
    assert big.params.omega == pytest.approx(a * a * fit.params.omega, rel=1e-3)
    assert big.params.u == pytest.approx(a * fit.params.u, rel=1e-3)
    for name in ("theta", "alpha", "beta"):
        assert getattr(big.params, name) == pytest.approx(getattr(fit.params, name), abs=1e-3)


def test_analytic_gradient_matches_central_differences(daily_sample):
    x = daily_sample[0][:800] / 0.01
    rng = np.random.default_rng(5)
    h1 = float(np.var(x, ddof=1))
    for _ in range(20):
        vec = np.array([
            rng.uniform(-0.05, 0.05),
            rng.uniform(-0.3, 0.3),
            rng.uniform(0.01, 0.2),
            rng.uniform(0.01, 0.3),
            rng.uniform(0.3, 0.85),
        ])
        p = GarchParams(vec[2], vec[3], vec[4], u=vec[0], theta=vec[1])
        analytic = garch_scores(x, p, h1).sum(axis=0)
        numeric = np.empty(5)
        for k in range(5):
            step = 1e-6 * max(1.0, abs(vec[k]))
            up, dn = vec.copy(), vec.copy()
            up[k] += step
            dn[k] -= step
            f = [garch_loglik(x, GarchParams(v[2], v[3], v[4], u=v[0], theta=v[1]), h1).sum() for v in (up, dn)]
            numeric[k] = (f[0] - f[1]) / (2 * step)
        scale = np.maximum(np.abs(numeric), 1.0)
        np.testing.assert_array_less(np.abs(analytic - numeric) / scale, 1e-5)


def test_nonconvergence_is_reported(daily_sample):
    x = daily_sample[0]
    fit = fit_ma1_garch11(x, GarchOptions(maxiter=2))
    assert not fit.converged
    assert fit.convergence.status in ("max_iter", "failed")
    assert np.all(np.isfinite(fit.params.as_vector()))


def test_bad_input():
    with pytest.raises(ValueError):
        fit_ma1_garch11(np.r_[np.ones(200), np.nan])
    with pytest.raises(ValueError):
        fit_garch11(np.zeros(300))
