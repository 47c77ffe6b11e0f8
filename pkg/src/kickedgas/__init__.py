"""Simulator and analytics for a 1D Bose gas with periodically kicked
interactions: exponential spreading for delta kicks, long-time subdiffusion
for finite kicks, and the closed-form predictions tying the two together."""

__version__ = "0.1.0"

from .precision import GridSizeError, PrecisionError, ScalarContext
from .dynamics import (
    AliasingError,
    ConfigError,
    PhaseConstraint,
    PhaseVector,
    PhysicalParams,
    Propagator,
    SimConfig,
    WaveState,
    derive_dimensionless,
    draw_phases,
    free_propagate,
    init_state,
    kick_delta,
    kick_finite,
    q_centered,
    q_values,
    run_trajectory,
)
from .observables import (
    EnsembleStats,
    FitRefusedError,
    TrajectoryRecord,
    amplitude_histogram,
    condensate_fraction,
    ipr,
    sd_sigma,
    sigma2,
    tail_length,
)
from .ensemble import (
    InvalidEnsembleError,
    SweepPlan,
    SweepResult,
    merge,
    run_ensemble,
    run_sweep,
)
from . import predictions

__all__ = [
    "__version__",
    "AliasingError",
    "ConfigError",
    "EnsembleStats",
    "FitRefusedError",
    "GridSizeError",
    "InvalidEnsembleError",
    "PhaseConstraint",
    "PhaseVector",
    "PhysicalParams",
    "PrecisionError",
    "Propagator",
    "ScalarContext",
    "SimConfig",
    "SweepPlan",
    "SweepResult",
    "TrajectoryRecord",
    "WaveState",
    "amplitude_histogram",
    "condensate_fraction",
    "derive_dimensionless",
    "draw_phases",
    "free_propagate",
    "init_state",
    "ipr",
    "kick_delta",
    "kick_finite",
    "merge",
    "predictions",
    "q_centered",
    "q_values",
    "run_ensemble",
    "run_sweep",
    "run_trajectory",
    "sd_sigma",
    "sigma2",
    "tail_length",
]
