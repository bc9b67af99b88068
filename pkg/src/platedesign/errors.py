"""Exception types shared across the package."""


class PlateDesignError(Exception):
    """Base class for all package errors."""


class InvalidProfile(PlateDesignError):
    """A material profile violates its bounds or grid invariants."""


class DomainError(PlateDesignError):
    """A field value left the domain an operation requires."""


class NonConvergence(PlateDesignError):
    """An iterative solver exhausted its budget.

    The best iterate reached so far is attached as ``best`` when available.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularSystem(PlateDesignError):
    """A discrete linear operator is numerically singular."""


class SingularKKT(PlateDesignError):
    """The constraint Jacobian lost rank; offending nodes in ``nodes``."""

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = nodes if nodes is not None else []


class DegenerateTriangle(PlateDesignError):
    """A mesh element is degenerate (zero or negative area)."""


class DegenerateMetric(PlateDesignError):
    """A chart metric has non-positive determinant."""


class InvertedElement(PlateDesignError):
    """A deformation inverted the metric (det F <= 0 at a quadrature point)."""


class MalformedProfile(PlateDesignError):
    """A design profile does not have the structure an extraction expects."""


class ConfigError(PlateDesignError):
    """A configuration file or value is invalid."""
