from .program import (ConicProgram, Constraint, ProgramError, add_log_hypograph,
                      add_quadratic_upper_bound, load_program, save_program)
from .realify import derealify, linear_map, real_part_row, realify
from .solve import (INFEASIBLE, NUMERICAL_FAILURE, OPTIMAL, ConicSolution, SolverOptions,
                    SolverUnavailable, solve)
from .standard import StandardForm, lower

__all__ = [
    "ConicProgram", "Constraint", "ProgramError", "add_log_hypograph",
    "add_quadratic_upper_bound", "load_program", "save_program", "derealify", "linear_map",
    "real_part_row", "realify", "INFEASIBLE", "NUMERICAL_FAILURE", "OPTIMAL", "ConicSolution",
    "SolverOptions", "SolverUnavailable", "solve", "StandardForm", "lower",
]
