"""Self-contained LP (revised simplex) and binary MIP (branch and bound) solvers."""

from .bnb import solve_mip
from .lp import (
    DEFAULT_TOLERANCES,
    LinearProgram,
    SolveResult,
    SolverError,
    Status,
    Tolerances,
    extract_duals,
    write_lp_file,
)
from .simplex import BoundedSimplex, dual_objective, solve_lp

__all__ = [
    "BoundedSimplex",
    "DEFAULT_TOLERANCES",
    "LinearProgram",
    "SolveResult",
    "SolverError",
    "Status",
    "Tolerances",
    "dual_objective",
    "extract_duals",
    "solve_lp",
    "solve_mip",
    "write_lp_file",
]
