"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: configuration problems exit with 2,
I/O problems with 3 and solver failures with 4.
"""


class MaternSPDEError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(MaternSPDEError, ValueError):
    pass


class MeshIOError(MaternSPDEError, IOError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class DomainError(MaternSPDEError, ValueError):
    """Operation called on a mesh of the wrong kind (e.g. normals of a volume mesh)."""


class DegenerateGeometryError(MaternSPDEError, ValueError):
    def __init__(self, message, element=None):
        self.element = element
        super().__init__(message)


class SolverError(MaternSPDEError, RuntimeError):
    """Iterative solve did not reach the requested tolerance.

    ``x`` holds the best iterate found and ``residual`` its relative residual.
    """

    def __init__(self, message, x=None, residual=None, iterations=None):
        self.x = x
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class NotSPDError(SolverError):
    pass


class FitError(MaternSPDEError, RuntimeError):
    pass
