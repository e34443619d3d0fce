"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid matrices, dimensions or parameter values."""


class SimulationAbort(RuntimeError):
    """A run was stopped: non-finite signals, a failed hypothesis check,
    or a time step that violates the resolution guard."""
