"""Shared exception types."""


class CondriskError(Exception):
    """Base class for all library-specific errors."""


class ParseError(CondriskError):
    """Syntax error in a textual literal or formula, with a character position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos
