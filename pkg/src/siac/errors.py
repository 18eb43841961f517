"""Exception hierarchy shared by all siac modules."""


class SiacError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(SiacError):
    """An argument violates a precondition (empty buffer, bad shape, ...)."""


class OutOfRange(SiacError):
    """A numeric argument falls outside its legal range."""


class ConfigError(SiacError):
    """An encoder configuration is unusable (e.g. empty search grids)."""


class BankError(SiacError):
    """An impulse-response bank is missing, mismatched, or lacks an index."""


class FormatError(SiacError):
    """A serialized file is not in the expected container format."""


class TruncationError(FormatError):
    """A serialized file ends before its declared content does."""


class ValidationError(FormatError):
    """A serialized file parses structurally but violates an invariant."""
