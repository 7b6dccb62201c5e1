"""Diagnostic exceptions carrying source positions."""

from __future__ import annotations


class MeltError(Exception):
    """Base class for all translation diagnostics.

    Every diagnostic knows where it happened so the driver can print
    file:line:col messages.
    """

    def __init__(self, message, loc=None):
        super().__init__(message)
        self.message = message
        self.loc = loc

    def __str__(self):
        if self.loc is not None:
            return f"{self.loc}: {self.message}"
        return self.message


class MeltReadError(MeltError):
    """Lexical or syntactic error while reading source text."""


class MeltExpandError(MeltError):
    """Error during macro-expansion (bad form, unbound name, ...)."""


class MeltTypeError(MeltError):
    """C-type inconsistency found during normalization."""


class MeltMatchError(MeltError):
    """Ill-formed pattern or match clause."""


class MeltEmitError(MeltError):
    """Error while emitting target source."""
