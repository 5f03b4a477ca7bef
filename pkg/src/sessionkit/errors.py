"""Exception types shared across the toolkit."""

from __future__ import annotations


class ContractError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ContractError):
    """Malformed concrete syntax; carries the offending position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class ValidationError(ContractError):
    """A raw term is not a well-formed session contract."""


class NotClosed(ValidationError):
    def __init__(self, name: str):
        super().__init__(f"free recursion variable {name!r}")
        self.name = name


class DuplicateBranch(ValidationError):
    def __init__(self, name: str):
        super().__init__(f"duplicate branch name {name!r} in a choice")
        self.name = name


class UnguardedRec(ValidationError):
    def __init__(self, var: str):
        super().__init__(f"recursion body of {var!r} is a bare variable")
        self.var = var


class ResourceLimit(ContractError):
    """A configurable exploration cap was exceeded; never a silent approximation."""


class StoreError(ContractError):
    """The registry's append-only log could not be replayed."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
