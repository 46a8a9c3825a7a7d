"""Exception hierarchy. Each error carries the pipeline stage that raised it."""


class SteklovLabError(Exception):
    stage = "unknown"

    def __init__(self, message, stage=None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage


class DomainError(SteklovLabError, ValueError):
    stage = "geometry"


class ResolutionError(SteklovLabError):
    stage = "geometry"


class IntegrationError(SteklovLabError):
    stage = "ode"


class PoleProximityError(SteklovLabError):
    stage = "weyl"


class OrderError(SteklovLabError, ValueError):
    stage = "asymptotics"


class FitInvalidError(SteklovLabError):
    stage = "compare"


class IterationError(SteklovLabError):
    stage = "transform"


class DimensionError(SteklovLabError, ValueError):
    stage = "transform"


class InversionError(SteklovLabError):
    stage = "transform"


class SequenceError(SteklovLabError, ValueError):
    stage = "muntz"


class PreconditionError(SteklovLabError):
    stage = "stability"


class DivergingNormError(SteklovLabError):
    stage = "stability"


class ConfigError(SteklovLabError, ValueError):
    stage = "config"
