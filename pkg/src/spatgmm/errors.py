"""Exception types raised across the package."""

import numpy as np


class ShapeError(ValueError):
    pass


class DegenerateCoordinatesError(ValueError):
    pass


class DomainError(ValueError):
    pass


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class CollinearityError(np.linalg.LinAlgError):
    """The 3x3 GLS normal matrix is singular (basis matrices are linearly dependent)."""


class NoPositiveDefiniteBetaError(RuntimeError):
    """No sigmoid parameter in the bracket yields a positive definite covariance."""


class EmptyComponentError(RuntimeError):
    def __init__(self, component, weight, floor):
        super().__init__(f"component {component} has weight {weight:.3g} below floor {floor}")
        self.component = component
        self.weight = weight


class FitError(RuntimeError):
    """Every restart of a fit failed."""

    def __init__(self, message, restarts=()):
        super().__init__(message)
        self.restarts = list(restarts)


class FormatError(ValueError):
    """Malformed or unsupported file content."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
