"""Exception hierarchy for the bridge."""
from __future__ import annotations


class BridgeError(Exception):
    """Base class for everything raised on purpose."""


class FormatError(BridgeError):
    """Malformed schema, corpus, or configuration input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class AlignmentError(BridgeError):
    """A word has no subword position to read a prediction from."""
