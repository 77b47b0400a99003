"""Exception types shared across the package.

The split matters for the CLI/service exit contract: configuration
problems are the caller's fault (exit code 1), invariant violations
indicate an internally inconsistent simulation and abort with a
diagnostic dump (exit code 2).
"""


class ConfigurationError(ValueError):
    """A config, profile or process definition violates a model invariant."""


class IngestionError(ConfigurationError):
    """A trace file is malformed.  Carries file name and line number."""

    def __init__(self, source: str, line: int | None, reason: str):
        self.source = source
        self.line = line
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {reason}")


class ModelViolationError(RuntimeError):
    """A simulated quantity left its admissible range (inconsistent profile)."""


class InvariantViolationError(RuntimeError):
    """A guaranteed run-time invariant (queue bound, drift bound) failed.

    ``details`` holds the diagnostic dump of the offending slot.
    """

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


class EnumerationBudgetError(RuntimeError):
    """An exhaustive-enumeration oracle was asked for an instance too large."""
