"""Exception types shared across the pipeline stages."""

from __future__ import annotations


class SessionSuiteError(Exception):
    """Base class for every input error the tools report."""


class MalformedLine(SessionSuiteError):
    def __init__(self, message: str, line: str | None = None, lineno: int | None = None):
        super().__init__(message)
        self.line = line
        self.lineno = lineno

    def __str__(self) -> str:
        msg = super().__str__()
        return f"line {self.lineno}: {msg}" if self.lineno is not None else msg


class SchemaViolation(SessionSuiteError):
    def __init__(self, message: str, lineno: int | None = None):
        super().__init__(message)
        self.lineno = lineno

    def __str__(self) -> str:
        msg = super().__str__()
        return f"line {self.lineno}: {msg}" if self.lineno is not None else msg


class EmptyProfile(SessionSuiteError):
    pass


class DanglingEdge(SessionSuiteError):
    pass


class InsufficientPopulation(SessionSuiteError):
    pass
