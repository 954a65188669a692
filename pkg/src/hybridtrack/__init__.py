"""Saturated hybrid position and heading tracking for thrust-propelled rigid bodies."""

from .errors import (ConfigError, DegenerateThrustError, HybridTrackError, InfeasibleConfigError,
                     InvariantBreach, MrpOutOfDiskError, NotInFlowSetError)
from .feasibility import BoundsReport, EnvelopeConstants, Gains, VehicleParams, audit
from .simulator import Log, SimConfig, run, summary
from .trajectory import TrajectoryConfig

__version__ = "0.1.0"

__all__ = [
    "BoundsReport", "ConfigError", "DegenerateThrustError", "EnvelopeConstants", "Gains",
    "HybridTrackError", "InfeasibleConfigError", "InvariantBreach", "Log", "MrpOutOfDiskError",
    "NotInFlowSetError", "SimConfig", "TrajectoryConfig", "VehicleParams", "audit", "run", "summary",
]
