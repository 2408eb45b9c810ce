"""Shared fixtures: small deterministic simulations reused across modules."""

from __future__ import annotations

import datetime as dt

import numpy as np
import pytest

from hfvol.garch import GarchParams
from hfvol.simulate import Arrivals, SimConfig, SProfile, simulate
from hfvol.ticktape import DayTape, TickTape, parse_time

FLAT_DAILY = GarchParams(1e-4, 0.0, 0.0)


def make_day(date, clock, prices) -> DayTape:
    """DayTape from ``HH:MM:SS`` strings."""
    return DayTape(date, np.array([parse_time(c) for c in clock]), np.array(prices, float))


@pytest.fixture(scope="session")
def sim_grid() -> object:
    """252 days, 60-second trade grid, U-shaped periodicity."""
    return simulate(SimConfig(days=252, arrivals=Arrivals("grid", 60.0), seed=11))


@pytest.fixture(scope="session")
def sim_poisson() -> object:
    """60 days of Poisson arrivals, one trade every two seconds on average."""
    return simulate(SimConfig(days=60, arrivals=Arrivals("poisson", 0.5), seed=5))


@pytest.fixture(scope="session")
def sim_flat() -> object:
    """Flat periodicity and constant daily volatility."""
    cfg = SimConfig(
        days=120,
        daily_garch=FLAT_DAILY,
        s_profile=SProfile("flat"),
        arrivals=Arrivals("grid", 60.0),
        seed=3,
    )
    return simulate(cfg)


@pytest.fixture
def three_day_tape() -> TickTape:
    """Three days of ten trades each, used for hand-traced window checks."""
    rows = {
        dt.date(2014, 1, 2): (
            [0, 60, 120, 180, 240, 300, 360, 420, 480, 540],
            [100, 100.5, 100.2, 100.8, 101, 100.7, 100.9, 101.3, 101.1, 101.5],
        ),
        dt.date(2014, 1, 3): (
            [30, 90, 150, 200, 260, 330, 390, 450, 500, 570],
            [50, 50.1, 49.9, 50.3, 50.2, 50.6, 50.4, 50.5, 50.9, 50.8],
        ),
        dt.date(2014, 1, 6): (
            [10, 70, 100, 210, 230, 310, 370, 400, 520, 590],
            [20, 20.2, 20.1, 19.9, 20.05, 20.3, 20.25, 20.4, 20.35, 20.6],
        ),
    }
    open_us = parse_time("09:30:00")
    days = tuple(
        DayTape(d, open_us + np.array(t, dtype=np.int64) * 1_000_000, np.array(p, float))
        for d, (t, p) in rows.items()
    )
    return TickTape(days)


# verdict lines from test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
