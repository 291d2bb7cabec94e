"""Exception types shared across the package.

ContractError signals a violated precondition or invariant (caller bug);
FormatError signals a malformed or truncated container file and carries the
byte offset where decoding failed.  The CLI maps ContractError to exit code 1
and FormatError / OSError to exit code 2.
"""


class ContractError(ValueError):
    """A documented precondition or invariant was violated."""


class DimensionError(ContractError):
    """Operand shapes are incompatible for the requested operation."""


class FormatError(Exception):
    """A container file is malformed; ``offset`` is the failing byte position."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
