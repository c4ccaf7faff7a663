"""Exception hierarchy shared across the toolkit.

FormatError covers malformed input bytes (CSV/JSON parsing, schema
violations) and maps to CLI exit code 2; DomainError covers semantically
invalid but well-formed data (insufficient observations, degenerate
geometry, diverging training, ...) and maps to exit code 1.
"""


class StrokeLabError(Exception):
    """Base class for all toolkit errors."""


class FormatError(StrokeLabError):
    """Input bytes do not conform to a declared file format."""


class DomainError(StrokeLabError):
    """Well-formed input violates a semantic precondition or invariant."""
