"""Exception types shared across the package."""


class ThermobsError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(ThermobsError):
    """Invalid grid/sensor/scenario configuration. CLI exit code 2."""


class SchedulingError(ThermobsError):
    """Probe schedule violation (position outside the domain, bad segments)."""


class ConstructionError(ThermobsError):
    """Disturbance synthesis cannot certify a requested bound."""


class SolverError(ThermobsError):
    """Inner iteration failed to converge. CLI exit code 3.

    Carries the final residual sup-norm in ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class EstimateUnavailable(ThermobsError):
    """No diffusivity estimate can be produced for the current window."""


class InsufficientHistory(EstimateUnavailable):
    """Frame ring buffer is not full yet."""


class WindowInactive(EstimateUnavailable):
    """Probe power was nonzero somewhere inside the history window."""


class NoConfidentSensors(EstimateUnavailable):
    """Every sensor failed the curvature / attention confidence masks."""
