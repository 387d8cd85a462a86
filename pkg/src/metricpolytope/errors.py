"""Exception types shared across the package.

Plain argument problems raise ``ValueError``; the classes here mark the
failure modes callers may want to handle specifically.
"""


class UnboundedError(ValueError):
    """The halfspace system does not describe a bounded set."""


class DegenerateError(ValueError):
    """The set is empty or has no interior."""


class CapabilityError(RuntimeError):
    """The request is beyond what the exact engine is set up to do."""


class BudgetExceeded(RuntimeError):
    """A search hit its node budget; carries how far it got."""

    def __init__(self, message, nodes_explored=0, partial=None):
        super().__init__(message)
        self.nodes_explored = nodes_explored
        self.partial = partial


class CapacityError(RuntimeError):
    """Too many objects to materialize; carries the exact count."""

    def __init__(self, message, count):
        super().__init__(message)
        self.count = count


class RefineScheduleError(RuntimeError):
    """A level of the multilevel estimator saw no accepted samples."""

    def __init__(self, message, level):
        super().__init__(message)
        self.level = level


class InfeasibleStateError(ValueError):
    """A point that should be inside the constraint set is not."""
