"""Exception hierarchy shared by all mksys modules."""


class MksysError(Exception):
    """Base class for every error raised by the toolkit."""


class ParseError(MksysError):
    """Malformed expression or configuration text.

    ``position`` is a byte offset into the expression source; ``line`` and
    ``column`` (1-based) are set when the error comes from a config file.
    """

    def __init__(self, message, position=0, expected="", found="", line=None, column=None):
        self.message = message
        self.position = position
        self.expected = expected
        self.found = found
        self.line = line
        self.column = column
        where = f"line {line}, column {column}" if line is not None else f"offset {position}"
        super().__init__(f"{message} at {where}")


class ArityError(ParseError):
    """Variable index not covered by the declared space dimension."""


class ConfigReferenceError(MksysError):
    """Duplicate or dangling identifier in a system configuration."""

    def __init__(self, ident, message=None):
        self.ident = ident
        super().__init__(message or f"unknown identifier {ident!r}")


class DomainError(MksysError):
    """Point outside the region where an operation is defined."""


class NumericError(MksysError):
    """Non-finite or out-of-range numerical result."""


class ChainError(MksysError):
    """Edge word whose consecutive edges do not connect."""


class SizeError(MksysError):
    """Exact enumeration would exceed the leaf cap."""


class DimError(MksysError):
    """Operation not available for this space dimension."""


class ConvergenceError(MksysError):
    """Iterative solver stopped above its residual tolerance."""
