"""Exception types raised by porofrac."""


class PorofracError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(PorofracError, ValueError):
    pass


class MeshQualityError(PorofracError, ValueError):
    pass


class InvalidStateError(PorofracError, ValueError):
    """A field left its admissible range (e.g. phase field outside [0, 1])."""


class ConfigError(PorofracError, ValueError):
    """Scenario document failed to parse or validate.

    ``key`` names the offending entry (dotted path) when known; ``line`` and
    ``column`` are 1-based positions for syntax errors.
    """

    def __init__(self, message, key=None, line=None, column=None):
        self.key = key
        self.line = line
        self.column = column
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}, column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class SolverError(PorofracError, RuntimeError):
    pass


class StepFailure(PorofracError, RuntimeError):
    """A staggered step did not converge; ``report`` carries diagnostics."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
