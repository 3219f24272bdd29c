"""
Exception hierarchy for game models, policies and solver guards.
"""
from django.core.exceptions import ValidationError


class SamgError(Exception):
    """Base class for every error raised by the toolkit."""


class ModelSyntaxError(SamgError):
    """A model or policy file does not follow the line grammar."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f'line {line}, column {column or 1}: {message}'
        super().__init__(message)


class ModelValidationError(SamgError, ValidationError):
    """
    A model or policy breaks one or more invariants.
    `violations` keeps the human-readable list, one entry per broken invariant.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        ValidationError.__init__(self, self.violations)

    def __str__(self):
        return '; '.join(self.violations)


class UnknownGameError(SamgError):

    def __init__(self, name, known=()):
        self.name = name
        hint = f" (known: {', '.join(known)})" if known else ''
        super().__init__(f'unknown builtin game or policy "{name}"{hint}')


class SizeGuardError(SamgError):
    """An enumeration or joint sum would exceed its configured limit."""

    def __init__(self, what, size, limit):
        self.what = what
        self.size = size
        self.limit = limit
        super().__init__(f'{what}: {size} exceeds the limit of {limit}')


class DimensionMismatchError(SamgError):
    """A policy table is not shaped for the model it is used with."""
