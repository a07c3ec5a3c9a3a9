"""Exception hierarchy shared by every module."""


class PersuasionError(Exception):
    """Base class for all errors raised by this package."""


class InvariantViolation(PersuasionError, ValueError):
    """A model object failed one of its structural checks."""


class ParseError(PersuasionError, ValueError):
    """An input file could not be parsed."""


class ZeroProbabilitySignal(PersuasionError, ValueError):
    """The posterior for a signal that is never sent was requested."""


class NotIncentiveCompatible(PersuasionError, ValueError):
    pass


class NonConvergence(PersuasionError, RuntimeError):
    pass


class SingularSystem(PersuasionError, RuntimeError):
    pass


class PolicyUndefined(PersuasionError, KeyError):
    """An agent policy has no action for a reachable meta-state."""


class LPFailure(PersuasionError, RuntimeError):
    def __init__(self, status, message=""):
        self.status = status
        super().__init__(f"LP solve failed with status {status.name}: {message}".rstrip(": "))


class RecoveryMismatch(PersuasionError, RuntimeError):
    pass


class CorollaryViolation(PersuasionError, RuntimeError):
    pass


class InvalidSpec(PersuasionError, ValueError):
    pass


class DiscountOutOfRange(InvalidSpec):
    pass


class NotIndependent(PersuasionError, ValueError):
    pass


class InvalidHorizon(PersuasionError, ValueError):
    pass


class DegenerateRatio(PersuasionError, ArithmeticError):
    pass


class SweepFailure(PersuasionError):
    """A sweep instance failed; the message names the grid point and seed."""
