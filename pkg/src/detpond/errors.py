"""Exception types shared across the package."""


class DetpondError(Exception):
    """Base class for package errors."""


class ModelError(DetpondError):
    """Dynamics produced a non-finite derivative or inconsistent state."""


class ConfigError(DetpondError):
    """Invalid or unreadable configuration / input file."""


class OutOfGrid(DetpondError):
    """A decision state fell outside the strategy's grid."""


class StrategyGap(DetpondError):
    """A strategy returned an empty mode set at a reached decision state."""


class InfeasibleError(DetpondError):
    """No safe mode exists at the requested initial state."""
