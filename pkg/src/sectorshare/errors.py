"""Exception hierarchy shared across the package.

Each class maps to a process exit code in the CLI layer: validation and
configuration problems exit 1, I/O problems exit 2, numerical failures
exit 3.
"""

from __future__ import annotations


class SectorShareError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(SectorShareError):
    """Invalid data, configuration, or arguments."""

    exit_code = 1


class ParseError(ValidationError):
    """Malformed input row; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InputOutputError(SectorShareError):
    """Missing or unreadable files, unwritable output locations."""

    exit_code = 2


class NumericalError(SectorShareError):
    """Non-finite posterior density or a failed numerical routine."""

    exit_code = 3
