"""Exception hierarchy shared by the simulator, environment and CLI."""


class SemNavError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SemNavError, ValueError):
    """Invalid parameters or settings (CLI exit code 2)."""


class BoundsViolationError(ConfigurationError):
    """An action lies outside the robot's action space."""


class DegenerateConfigurationError(SemNavError, ArithmeticError):
    """Geometry that makes a force or direction undefined, e.g. coincident agents."""


class ScenarioError(ConfigurationError):
    """A scenario is malformed, infeasible, or could not be placed."""


class UsageError(SemNavError, RuntimeError):
    """An API was called out of order, e.g. stepping a finished episode."""


class PolicyLoadError(ConfigurationError):
    """A checkpoint does not match the requested observation layout."""


class TrainingFault(SemNavError, RuntimeError):
    """Non-finite values appeared in the network or optimizer."""
