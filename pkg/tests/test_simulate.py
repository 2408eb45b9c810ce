import datetime as dt

import numpy as np
import pytest

from hfvol.aggregate import aggregate
from hfvol.garch import GarchParams
from hfvol.simulate import (
    DEFAULT_DAILY,
    Arrivals,
    SimConfig,
    SProfile,
    export_truth,
    load_config,
    read_truth,
    simulate,
    simulate_daily,
)
from hfvol.stats import describe, intraday_profile
from hfvol.ticktape import read_tape

from conftest import FLAT_DAILY


def test_same_seed_bitwise_identical():
    cfg = SimConfig(days=15, arrivals=Arrivals("poisson", 0.2), seed=9)
    a, b = simulate(cfg), simulate(cfg)
    for x, y in zip(a.tape.days, b.tape.days):
        np.testing.assert_array_equal(x.times, y.times)
        assert x.prices.tobytes() == y.prices.tobytes()
    assert a.sigma.tobytes() == b.sigma.tobytes()
    other = simulate(SimConfig(days=15, arrivals=Arrivals("poisson", 0.2), seed=10))
    assert other.sigma.tobytes() != a.sigma.tobytes()


def test_normalization_per_day(sim_poisson, sim_grid):
    for out in (sim_poisson, sim_grid):
        for truth in out.truth:
            assert np.sum(truth.w * truth.s**2) == pytest.approx(1.0, abs=1e-12)


def test_exact_decomposition(sim_poisson):
    for truth in sim_poisson.truth:
        np.testing.assert_array_equal(
            truth.r, np.sqrt(truth.w) * truth.sigma * truth.eps * truth.s * truth.z
        )
    np.testing.assert_allclose(sim_poisson.daily_returns, [t.r.sum() for t in sim_poisson.truth])


def test_iid_gaussian_case_kurtosis():
    cfg = SimConfig(
        days=257,
        daily_garch=FLAT_DAILY,
        s_profile=SProfile("flat"),
        intraday_garch=(1.0, 0.0, 0.0),
        arrivals=Arrivals("grid", 6.0),
        seed=1,
    )
    out = simulate(cfg)
    r = np.concatenate([t.r for t in out.truth])
    assert r.size > 1_000_000
    assert abs(describe(r).kurtosis - 3) < 0.05


def test_poisson_durations_exponential():
    out = simulate(SimConfig(days=10, arrivals=Arrivals("poisson", 0.5), seed=2))
    d = np.concatenate([np.diff(day.times) for day in out.tape.days]) / 1e6
    assert d.size > 100_000
    assert d.mean() ** 2 / d.var() == pytest.approx(1.0, abs=0.05)


def test_export_round_trip(tmp_path):
    out = simulate(SimConfig(days=3, arrivals=Arrivals("poisson", 0.1), seed=6))
    files = export_truth(out, tmp_path)
    tape = read_tape(files["tape"])
    for a, b in zip(tape.days, out.tape.days):
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.prices, b.prices)
    truth = read_truth(tmp_path)
    assert truth["r"].size == sum(t.r.size for t in out.truth)
    np.testing.assert_array_equal(truth["r"], np.concatenate([t.r for t in out.truth]))
    rebuilt = np.sqrt(truth["w"]) * truth["sigma"] * truth["eps"] * truth["s"] * truth["z"]
    np.testing.assert_allclose(rebuilt, truth["r"], rtol=0, atol=1e-15)


def test_config_round_trip(tmp_path):
    cfg = SimConfig(days=12, seed=3, s_profile=SProfile("custom", table=(2.0, 1.0, 3.0)),
                    arrivals=Arrivals("poisson", 0.3), start_date=dt.date(2015, 6, 1))
    again = SimConfig.from_mapping({k: str(v) for k, v in cfg.to_dict().items()})
    assert again == cfg
    path = tmp_path / "sim.cfg"
    path.write_text("# small run\ndays = 4\nseed = 8\nprofile = u_shape:2\narrivals = grid:300\n")
    loaded = load_config(path)
    assert loaded.days == 4 and loaded.s_profile == SProfile("u_shape", 2.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"days": 0},
        {"daily_garch": GarchParams(1e-6, 0.5, 0.6)},
        {"daily_garch": GarchParams(1e-6, 0.1, 0.8, u=0.001)},
        {"intraday_garch": (0.05, 0.5, 0.5)},
        {"arrivals": Arrivals("grid", 7 * 60.0)},
        {"arrivals": Arrivals("poisson", 1e-4)},
    ],
)
def test_invalid_configs(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_profile_parsing_and_means():
    assert SProfile.parse("u_shape") == SProfile("u_shape", 3.0)
    assert SProfile.parse("flat").kind == "flat"
    with pytest.raises(ValueError):
        SProfile.parse("custom:1;0")
    prof = SProfile("u_shape", 3.0)
    grid = np.linspace(0.2, 0.45, 200_001)
    f = prof.density(grid)
    trapezoid = float(np.sum((f[1:] + f[:-1]) / 2) * (grid[1] - grid[0]) / 0.25)
    assert prof.mean_over(0.2, 0.45) == pytest.approx(trapezoid, rel=1e-9)
    custom = SProfile("custom", table=(1.0, 3.0))
    assert custom.mean_over(0.25, 0.75) == pytest.approx(2.0)


def test_simulate_daily_shapes():
    x, h = simulate_daily(DEFAULT_DAILY, 100, seed=0, reps=7)
    assert x.shape == h.shape == (7, 100)
    x1, h1 = simulate_daily(DEFAULT_DAILY, 100, seed=0)
    assert x1.shape == (100,) and np.all(h1 > 0)


def _txn_position_profile(tape, T):
    series = aggregate(tape, f"txn:{T}")
    k = min(len(d) for d in series.days)
    return np.mean(np.abs(np.vstack([d.returns[:k] for d in series.days])), axis=0)


@pytest.fixture(scope="module")
def cycle_pair():
    common = dict(days=3000, daily_garch=FLAT_DAILY, arrivals=Arrivals("grid", 60.0), seed=12)
    flat = simulate(SimConfig(s_profile=SProfile("flat"), **common))
    ushape = simulate(SimConfig(s_profile=SProfile("u_shape", 3.0), **common))
    return flat, ushape


def test_daily_cycle_only_with_u_shape(cycle_pair):
    flat, ushape = cycle_pair
    for out, cycle in ((flat, False), (ushape, True)):
        time_prof = intraday_profile(aggregate(out.tape, "time:1800"), "mean_abs")
        txn_prof = _txn_position_profile(out.tape, 30)
        for prof in (time_prof, txn_prof):
            ratio = prof.max() / prof.min()
            assert (ratio > 1.5) if cycle else (ratio < 1.1)
