"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class PufflocError(Exception):
    """Base class for package errors."""


class ParameterError(PufflocError, ValueError):
    """An argument is outside its documented domain."""


class ConvergenceError(PufflocError, RuntimeError):
    """An iterative routine stopped without meeting its tolerance."""

    def __init__(self, message, last_iterate=None, iterations=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class DegenerateGeometryError(PufflocError, ValueError):
    """Two equations share a center and cannot be eliminated."""


class DomainError(PufflocError, ValueError):
    """A model was evaluated outside the region where it is defined."""


class OutOfScopeError(DomainError):
    """Concentration outside the sensor's detection scope."""


class EstimationError(PufflocError, RuntimeError):
    """The localization pipeline could not produce an estimate."""


class ParseError(PufflocError, ValueError):
    """Malformed input file; message carries the file and line."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(loc + message)
        self.path = path
        self.line = line
