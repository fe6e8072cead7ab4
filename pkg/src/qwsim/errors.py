"""Exception hierarchy shared across the package."""


class QwsimError(Exception):
    """Base class for all package errors."""


class ScenarioError(QwsimError):
    """Invalid scenario configuration (rejected before any computation)."""


class GridError(QwsimError):
    """Inconsistent grid construction parameters."""


class NumericalError(QwsimError):
    """A solver failed (singular matrix, non-convergence, instability)."""


class SingularMatrixError(NumericalError):
    """Structural or numerical singularity in a direct solve."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row
