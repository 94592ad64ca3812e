"""Exception hierarchy. The CLI maps each family to an exit code."""


class QCardError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigurationError(QCardError, ValueError):
    """Invalid model, layer, or run configuration."""

    exit_code = 1


class UsageError(QCardError, ValueError):
    """An API or CLI was called with arguments it cannot accept."""

    exit_code = 1


class WorkloadError(QCardError):
    """A query or workload file violates the workload contract."""

    exit_code = 2


class ParseError(WorkloadError):
    """SQL text outside the supported subset."""

    def __init__(self, message: str, token: str | None = None, position: int | None = None):
        self.token = token
        self.position = position
        if token is not None:
            message = f"{message} (token {token!r} at position {position})"
        super().__init__(message)


class IngestionError(WorkloadError):
    """Table data could not be matched against a query's predicates."""


class NumericError(QCardError, ArithmeticError):
    """Training produced a non-finite value."""

    exit_code = 3

    def __init__(self, message: str, episode: int | None = None):
        self.episode = episode
        super().__init__(message)
