"""Exception types shared across the package."""


class ContagionLabError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(ContagionLabError, ValueError):
    """A generator, activation or intervention parameter is out of range."""


class EdgeListError(ContagionLabError, ValueError):
    """An edge-list file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class InterventionError(ContagionLabError, ValueError):
    """The graph cannot absorb the requested number of new edges."""


class UndefinedCIError(ContagionLabError, ValueError):
    """Fewer than two uncensored samples; a normal interval is undefined."""


class OracleSizeError(ContagionLabError, ValueError):
    """Graph too large for exhaustive enumeration."""


class ConfigError(ContagionLabError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)
