"""Numerical laboratory for the pairwise counter race and its speed ``V(N)``."""

from .config_algebra import Configuration, TestFunction
from .dynamics import CounterState, GapState, SpeedEstimate, TailMeasurement, simulate_speed

__all__ = [
    "Configuration",
    "TestFunction",
    "CounterState",
    "GapState",
    "SpeedEstimate",
    "TailMeasurement",
    "simulate_speed",
]
__version__ = "0.1.0"
