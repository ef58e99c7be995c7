"""Exception types raised across the toolkit."""


class LinekitError(Exception):
    """Base class for all toolkit errors."""


class DomainError(LinekitError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ShapeError(LinekitError, ValueError):
    """Tensor or matrix dimensions do not agree."""


class ConfigError(LinekitError, ValueError):
    """A parameter bundle violates its structural invariants."""


class FormatError(LinekitError, ValueError):
    """A file payload does not follow its on-disk format."""


class LabelParseError(FormatError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno
        self.reason = message
