"""Exception types raised by the samplers."""


class ConfigurationError(ValueError):
    """Inconsistent model, problem or sampler configuration."""


class DegenerateWeightsError(ArithmeticError):
    """The weights of a sample set sum to zero (or, where required, are negative).

    ``level`` identifies the offending level of a multilevel estimator.
    """

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class AcceptanceRateError(RuntimeError):
    """Rejection sampling exceeded its attempt cap; the threshold is too small."""


class ApproximationUselessError(ArithmeticError):
    """The low-fidelity classifier does not beat chance (R_0 <= 0)."""


class AllocationError(ValueError):
    """Sample allocation impossible from the supplied level statistics."""
