"""Exception types raised by the library."""


class HybridTrackError(Exception):
    """Base class for library errors."""


class DegenerateThrustError(HybridTrackError):
    """Commanded thrust vector (or its vertical component) vanished."""


class InfeasibleConfigError(HybridTrackError):
    """Gains or envelope violate a strict feasibility inequality."""


class NotInFlowSetError(HybridTrackError):
    """Lifting output requested while a jump condition is unserviced."""


class MrpOutOfDiskError(HybridTrackError):
    """MRP error left the (1 + delta) ball handed to the torque law."""


class InvariantBreach(HybridTrackError):
    """A runtime invariant failed during simulation.

    Carries the hybrid time ``(t, j)`` at which it was detected.
    """

    def __init__(self, message: str, t: float, j: int):
        super().__init__(f"{message} at hybrid time (t={t:.6f} s, j={j})")
        self.t = t
        self.j = j
        self.reason = message


class ConfigError(HybridTrackError):
    """Malformed run configuration."""
