"""Exception types shared across the pipeline."""


class ValidationError(ValueError):
    """Input violates a documented precondition or bound."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class SchemaError(ValidationError):
    """A tabular input is missing a required column."""


class EmptyBaselineError(ValidationError):
    """Every group was excluded, so no baseline curve can be pooled."""
