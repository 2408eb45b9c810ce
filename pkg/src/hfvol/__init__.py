"""
Multiplicative component intraday volatility model.

Returns are decomposed into a daily GARCH volatility, a deterministic
time-of-day periodicity and an intraday GARCH component.
"""

from hfvol.aggregate import Scheme, daily_returns
from hfvol.garch import GarchParams, fit_garch11, fit_ma1_garch11, persistence
from hfvol.mcmodel import PipelineOptions, fit_pipeline
from hfvol.periodicity import estimate_periodicity_grid, estimate_periodicity_irregular, filter_returns
from hfvol.simulate import SimConfig
from hfvol.ticktape import TickTape, read_tape

__version__ = "0.1.0"

__all__ = [
    "GarchParams",
    "PipelineOptions",
    "Scheme",
    "SimConfig",
    "TickTape",
    "daily_returns",
    "estimate_periodicity_grid",
    "estimate_periodicity_irregular",
    "filter_returns",
    "fit_garch11",
    "fit_ma1_garch11",
    "fit_pipeline",
    "persistence",
    "read_tape",
]
