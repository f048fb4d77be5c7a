"""Exception types shared across the solvers, verifiers and CLI."""


class BreatherLabError(Exception):
    """Base class for all breatherlab errors."""


class NewtonDiverged(BreatherLabError):
    """Newton iteration failed to reach the residual tolerance.

    Recoverable: the adaptive driver retries the step with dt/2.
    """


class NonFiniteState(BreatherLabError):
    """A field handed to a solver contains NaN or infinity."""


class StepUnderflow(BreatherLabError):
    """Adaptive time step shrank below 1e-14 * dt_init."""


class MissingSnapshot(BreatherLabError):
    """A verification asked for a time the solution did not record."""


class WindowOutOfRange(BreatherLabError):
    """A verification window (or its shifted image) leaves the safe grid range."""


class ConfigError(BreatherLabError):
    """A run configuration file is missing keys or has unusable values."""
