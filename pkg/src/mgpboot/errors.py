"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures onto its documented codes without a lookup table.
"""


class MgpBootError(Exception):
    exit_code = 1


class ConfigError(MgpBootError):
    """Malformed or invalid configuration (usage level)."""

    exit_code = 2

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line


class DataError(MgpBootError):
    exit_code = 3


class ShapeError(DataError, ValueError):
    pass


class EmptyRequestError(MgpBootError, ValueError):
    exit_code = 3


class DomainError(MgpBootError, ValueError):
    exit_code = 3


class SupportError(DomainError):
    def __init__(self, message, component):
        super().__init__(message)
        self.component = component


class FactorizationError(MgpBootError, ValueError):
    """Cholesky factorization failed at leading minor ``minor`` (1-based)."""

    exit_code = 3

    def __init__(self, minor):
        super().__init__(f"matrix is not positive definite: leading minor {minor} is not positive")
        self.minor = minor


class UnsupportedMethodError(MgpBootError, ValueError):
    exit_code = 2


class StatisticalPreconditionError(MgpBootError):
    exit_code = 4


class EmptyExceedanceError(StatisticalPreconditionError):
    pass


class FitError(StatisticalPreconditionError):
    pass


class ConvergenceError(FitError):
    def __init__(self, message, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate
