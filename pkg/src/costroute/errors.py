"""Exception hierarchy. The CLI maps each class to an exit code."""


class CostRouteError(Exception):
    """Base class for all package errors."""


class ValidationError(CostRouteError, ValueError):
    """Input data or configuration violates a documented invariant."""


class InfeasibleError(CostRouteError):
    """No routing rule can satisfy the requested budget."""


class DegenerateError(CostRouteError, ValueError):
    """A statistic is undefined for the given input (zero range, zero variance)."""
