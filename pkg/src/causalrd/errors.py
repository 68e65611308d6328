"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the set on which a function is defined."""


class NonStationaryError(ValueError):
    """An autoregressive model has a pole on or outside the unit circle."""


class PaleyWienerError(ValueError):
    """A magnitude response is not log-integrable, so no minimum-phase factor exists."""


class DesignError(RuntimeError):
    """The iterative filter design failed to produce a valid state."""


class SingularBlockError(RuntimeError):
    """A covariance block needed by the sequential realization is singular."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SimulationError(RuntimeError):
    """The time-domain coder simulation diverged."""
