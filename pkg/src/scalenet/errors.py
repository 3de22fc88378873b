"""Exception types shared across the package."""


class ScalenetError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ScalenetError, ValueError):
    """Non-finite, malformed, or out-of-domain input."""


class NoContractionError(ScalenetError, ValueError):
    """Raised when a + b >= 0, i.e. no decaying envelope exists."""


class HistoryUnderflowError(ScalenetError, RuntimeError):
    """Delayed state lookup requested before the start of the history segment."""


class DivergenceError(ScalenetError, RuntimeError):
    """Integration produced a non-finite state.

    Attributes:
        time: simulation time at which the state first became non-finite.
    """

    def __init__(self, time: float):
        super().__init__(f"state became non-finite at t = {time:.6g}")
        self.time = time


class EquilibriumError(ScalenetError, RuntimeError):
    """Equilibrium solver failed to converge within its budget."""

    def __init__(self, residual: float, message: str = ""):
        detail = message or f"equilibrium solve stalled at residual {residual:.3e}"
        super().__init__(detail)
        self.residual = residual


class ScenarioError(ScalenetError, ValueError):
    """Invalid scenario configuration."""
