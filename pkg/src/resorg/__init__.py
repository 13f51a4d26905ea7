"""Reservoir computing with self-organization and information-theoretic measures."""

__version__ = "0.1.0"

from .reservoir import (  # noqa: E402
    Readout,
    Reservoir,
    ReservoirParams,
    StateTrajectory,
    build_reservoir,
    memory_capacity,
    run,
    train_readout,
)
from .timeseries import TimeSeries  # noqa: E402

__all__ = [
    "Readout",
    "Reservoir",
    "ReservoirParams",
    "StateTrajectory",
    "TimeSeries",
    "build_reservoir",
    "memory_capacity",
    "run",
    "train_readout",
]
