"""Shared exception types."""

from __future__ import annotations


class ValidationError(ValueError):
    """Input failed structural or semantic validation.

    Carries an optional list of individual problems so callers (the CLI in
    particular) can report every error at once instead of the first.
    """

    def __init__(self, message: str, problems: list[str] | None = None):
        super().__init__(message)
        self.problems: list[str] = problems if problems is not None else [message]


class NotFoundError(KeyError):
    """A referenced entity (topic, device, ticket, report) does not exist."""


class ConflictError(RuntimeError):
    """The operation contradicts existing state (duplicate id, stale version,
    illegal lifecycle step, colliding mapping)."""


class InsufficientDataError(RuntimeError):
    """Not enough samples to compute the requested statistic or baseline."""


class CommandRejected(RuntimeError):
    """An actuator command was refused; the world is unchanged by it."""


class EvaluationError(RuntimeError):
    """A candidate-schedule evaluation kept failing after its retry; the
    optimization run escalates instead of guessing."""
