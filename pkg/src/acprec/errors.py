"""Exception types shared across the package."""

from __future__ import annotations


class AcprecError(Exception):
    """Base class for all package errors."""


class ParseError(AcprecError):
    """Malformed circuit or network file."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)


class CircuitError(AcprecError):
    """Structurally invalid circuit or network."""


class EvidenceError(AcprecError):
    """Evidence refers to unknown variables or states, or has zero probability."""


class EnumerationCapError(AcprecError):
    """Joint-instantiation space exceeds the configured cap."""


class FormatError(AcprecError):
    """Number format outside the supported parameter ranges."""


class RangeOverflowError(AcprecError):
    """A value exceeded the largest representable magnitude of the format."""


class RangeUnderflowError(AcprecError):
    """A positive value fell below the smallest representable magnitude."""


class InfeasibleError(AcprecError):
    """No representation satisfies the requested error tolerance."""
