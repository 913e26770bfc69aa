"""Continuous-time mixed-integer model: construction, LP text round-trip,
external solver driver, and schedule extraction."""

from .model import (  # noqa: F401
    Constraint,
    MilpModel,
    Variable,
    build_model,
    objective_bounds,
)
from .lpformat import MalformedLpError, export_lp, parse_lp  # noqa: F401
from .solve import (  # noqa: F401
    InconsistentSolutionError,
    Solution,
    SolverConfig,
    SolverCrashedError,
    SolverNotFoundError,
    extract_schedule,
    solve,
)
