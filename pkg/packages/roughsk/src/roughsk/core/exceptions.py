class RoughSKError(Exception):
    """Base class for every error raised by the toolkit."""

    pass


class ConfigError(RoughSKError):
    """Raised when an experiment configuration or CLI input is invalid."""

    pass


class UnknownModel(RoughSKError):
    """Raised when a model name is not in the registry."""

    pass


class NonFiniteField(RoughSKError):
    """Raised when a model field or observable evaluates to NaN or infinity."""

    pass


class SingularSystem(RoughSKError):
    """Raised when a Lyapunov system is numerically singular (ellipticity lost)."""

    pass


class StabilityViolation(RoughSKError):
    """Raised when a time step breaks the stability or accuracy guard of a scheme."""

    pass


class BlowUp(RoughSKError):
    """Raised when a simulated state leaves the blow-up threshold."""

    def __init__(self, message: str, path_index: int = 0, step: int = 0):
        super().__init__(message)
        self.path_index = path_index
        self.step = step

    def __reduce__(self):
        return type(self), (str(self), self.path_index, self.step)


class GridMismatch(RoughSKError):
    """Raised when two paths do not share a grid or a refinement does not fit."""

    pass


class InsufficientData(RoughSKError):
    """Raised when a statistic needs more samples than were provided."""

    pass


class PathFailure(RoughSKError):
    """Raised when a single Monte Carlo path fails; aborts the whole run."""

    def __init__(self, epsilon: float, path_index: int, cause: Exception):
        super().__init__(
            f"path failed at epsilon={epsilon:g} k={path_index}: "
            f"{type(cause).__name__} - {cause}"
        )
        self.epsilon = epsilon
        self.path_index = path_index
        self.cause = cause

    def __reduce__(self):
        return type(self), (self.epsilon, self.path_index, self.cause)
