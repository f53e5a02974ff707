"""Clearing of financial networks with debt and credit default swaps, plus circuit reductions."""

from .errors import CdsClearError, InternalConsistencyError, PreconditionError
from .netcore import (
    Contract,
    FinancialSystem,
    RecoveryVector,
    default_set_of,
    forward_evaluate,
    is_eps_default_set,
    is_eps_solution,
    update_F,
    validate,
)
from .solvers import GridSpec, fictitious_default, grid_oracle, iterate_monotone, solve_decomposed

__version__ = "0.1.0"
