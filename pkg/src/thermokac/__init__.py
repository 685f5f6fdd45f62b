"""Exact simulation of the thermostatted Kac process and its quenched companion."""

__version__ = "0.1.0"

from .core import ConfigError, DegenerateStateError, InitialDistribution, SimConfig
from .engine import EnsembleResult, run_ensemble, simulate, simulate_coupled
from .diagnostics import chaos_defect, fit_rate, theorem_bounds, wasserstein1

__all__ = [
    "ConfigError",
    "DegenerateStateError",
    "EnsembleResult",
    "InitialDistribution",
    "SimConfig",
    "chaos_defect",
    "fit_rate",
    "run_ensemble",
    "simulate",
    "simulate_coupled",
    "theorem_bounds",
    "wasserstein1",
]
