"""Exception types shared across the package."""


class DHFlowError(Exception):
    """Base class for all package errors."""


class TopologyError(DHFlowError):
    """The network graph violates a structural requirement."""


class ScenarioError(DHFlowError):
    """A scenario file is malformed; the message names the offending field."""


class NumericsError(DHFlowError):
    """A numerical routine failed to converge or left its domain."""


class InfeasibleStateError(DHFlowError):
    """A plant state left its physical bounds (tank volume outside [0, capacity])."""

    def __init__(self, message: str, tank_id: int | None = None):
        super().__init__(message)
        self.tank_id = tank_id
