"""Exception types shared across the package.

The CLI maps these onto process exit codes, so new error conditions should
reuse one of the classes below rather than raising bare ValueErrors.
"""


class NextgraphError(Exception):
    """Base class for all package errors."""


class ConfigError(NextgraphError):
    """Invalid configuration value or combination (CLI exit code 2)."""


class DataError(NextgraphError):
    """Malformed or inconsistent input data (CLI exit code 3)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)
        self.line = line


class OrderingError(NextgraphError):
    """A node id is missing from, or inconsistent with, the ordering registry."""


class GenerationError(NextgraphError):
    """A synthetic generator was asked for something it cannot produce."""


class NumericError(NextgraphError):
    """Training or evaluation produced a non-finite value (CLI exit code 4)."""
