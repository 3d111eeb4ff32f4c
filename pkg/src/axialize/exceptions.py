"""Exception hierarchy.

The CLI maps the three top-level families onto distinct exit codes.
"""


class AxializeError(Exception):
    """Base class for all package errors."""


class ConfigError(AxializeError, ValueError):
    """Invalid input parameters or configuration file contents."""


class InvalidConfigError(ConfigError):
    pass


class PhysicsError(AxializeError):
    """The requested physical situation has no valid model solution."""


class UnstableTrapError(PhysicsError):
    pass


class BranchDegenerateError(PhysicsError):
    """delta0 = 0, where the damping-rate formula is singular."""


class NoSteadyStateError(PhysicsError):
    pass


class DivergenceError(PhysicsError):
    pass


class StepTooLargeError(ConfigError):
    pass


class RateUndersampledError(ConfigError):
    pass


class EmptyStreamError(ConfigError):
    pass


class InsufficientDataError(ConfigError):
    pass


class FitError(AxializeError):
    """A fit failed to produce a usable estimate."""


class FitFailureError(FitError):
    pass


class SingularJacobianError(FitError):
    pass


class BranchAmbiguousError(FitError):
    pass
