"""Exception hierarchy shared by every subpackage."""


class HybridSwarmError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(HybridSwarmError, ValueError):
    pass


class NonFiniteStateError(HybridSwarmError, FloatingPointError):
    pass


class ZenoSuspected(HybridSwarmError, RuntimeError):
    """Raised when a run exceeds its jump budget before the horizon."""


class RateBoundError(HybridSwarmError, ValueError):
    """A jump rate exceeded its declared upper bound during thinning."""


class KernelSamplingError(HybridSwarmError, RuntimeError):
    pass


class GuardError(HybridSwarmError, ValueError):
    """A guard seed was not strictly positive."""


class UnknownAgentError(HybridSwarmError, KeyError):
    pass


class CorruptTraceError(HybridSwarmError, ValueError):
    pass


class SurvivalTooSmall(HybridSwarmError, ValueError):
    """Hazard requested where the survival estimate is below the floor."""


class RateValidityError(HybridSwarmError, ValueError):
    """A rate estimate was queried outside its validity mask."""


class ConfigError(HybridSwarmError, ValueError):
    """Scenario validation failure; ``errors`` lists every violation."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
