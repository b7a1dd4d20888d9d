"""Exception types shared across the package.

Each error carries the process exit code the command line layer maps it to.
"""


class ShuffleMixError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class ParameterError(ShuffleMixError):
    """A caller-supplied parameter is out of domain or inconsistent."""

    exit_code = 2


class DomainError(ParameterError):
    """A derived quantity (matrix entry, probability) left its valid range."""


class CapExceededError(ShuffleMixError):
    """The requested state space or table exceeds the configured cap."""

    exit_code = 3


class HorizonError(ShuffleMixError):
    """A threshold scan ran out of horizon before crossing."""

    exit_code = 3

    def __init__(self, message, last_value=None):
        super().__init__(message)
        self.last_value = last_value


class MassDriftError(ShuffleMixError):
    """Probability mass drifted beyond tolerance during exact evolution."""

    exit_code = 3
