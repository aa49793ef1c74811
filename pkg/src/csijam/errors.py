"""Exception types raised across the package."""


class CsiJamError(Exception):
    """Base class for all errors raised by csijam."""


class ChannelError(CsiJamError, ValueError):
    pass


class DelayOutOfRangeError(ChannelError):
    """A multipath delay does not fit inside the CIR window."""


class ConfigError(CsiJamError, ValueError):
    pass


class TraceFormatError(CsiJamError, ValueError):
    """Malformed trace input. ``line`` is the 1-based line number, if known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class InsufficientDataError(CsiJamError, ValueError):
    pass
