"""Exception types shared across the package."""


class QtdnnError(Exception):
    """Base class for all package errors."""


class DomainError(QtdnnError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UsageError(QtdnnError, ValueError):
    """An operation was called with structurally invalid arguments."""


class EntropyExhaustedError(QtdnnError):
    """A finite entropy source ran out of words."""

    def __init__(self, message, run_index=None):
        super().__init__(message)
        self.run_index = run_index


class RemoteEntropyError(QtdnnError):
    """Base class for failures of the remote random-number service."""


class EntropyUnavailableError(RemoteEntropyError):
    """The service was unreachable and no cached entropy was available."""


class EntropyProtocolError(RemoteEntropyError):
    """The service answered with a malformed or out-of-range payload."""


class DivergenceError(QtdnnError):
    """Training produced non-finite weights."""

    def __init__(self, message, run_index=None):
        super().__init__(message)
        self.run_index = run_index


class StimulusParseError(QtdnnError, ValueError):
    """A raster file could not be parsed."""

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)
        self.line = line
        self.column = column
