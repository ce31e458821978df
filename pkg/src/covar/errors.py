"""Custom exception hierarchy for covar-sim."""

from __future__ import annotations


class CovarError(Exception):
    """Base exception for all covar-sim errors."""


class ValidationError(CovarError, ValueError):
    """Invalid user input (qubit counts, parameter vectors, pool sizes, etc.).

    Subclasses both CovarError and ValueError so plain ``except ValueError``
    handlers keep working.
    """


class ConfigError(ValidationError):
    """Malformed or inconsistent experiment configuration."""


class NumericalError(CovarError):
    """A numerical invariant does not hold (residuals, dimensions, ...)."""


class SingularSystemError(NumericalError):
    """The regularised normal matrix could not be factorised."""


class AlreadyConverged(CovarError):
    """All covariances vanish: the state already is a root."""


class SerializationError(CovarError):
    """Error while reading or writing circuits, pools, shadows or traces."""
