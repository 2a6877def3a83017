"""Exception types raised across the package."""


class BotdError(ValueError):
    pass


class DegeneratePolygon(BotdError):
    pass


class EmptyMask(BotdError):
    pass


class CenterOutsideMask(BotdError):
    pass


class NotSingleComponent(BotdError):
    pass


class ShapeMismatch(BotdError):
    pass


class InvalidPmd(BotdError):
    pass


class ParseError(BotdError):
    """Malformed annotation input. ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
