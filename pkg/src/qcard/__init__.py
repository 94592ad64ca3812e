"""Variational quantum circuits for cardinality estimation and correction."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    IngestionError,
    NumericError,
    ParseError,
    QCardError,
    UsageError,
    WorkloadError,
)
