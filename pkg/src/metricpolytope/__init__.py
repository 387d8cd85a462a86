"""Exact and Monte Carlo tools for the metric polytope and its discrete analogue."""
from .core import *  # noqa: F401,F403
from .discrete import *  # noqa: F401,F403
from .errors import (  # noqa: F401
    BudgetExceeded,
    CapabilityError,
    CapacityError,
    DegenerateError,
    InfeasibleStateError,
    RefineScheduleError,
    UnboundedError,
)
from .estimators import *  # noqa: F401,F403
from .exactvol import *  # noqa: F401,F403
from .sampler import *  # noqa: F401,F403
from .verification import SUITES, run_suite  # noqa: F401

__version__ = "0.1.0"
