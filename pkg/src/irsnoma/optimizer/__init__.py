"""Joint active / passive / power optimization by alternating SCA."""

from .algorithm import (alternate, converged_within, relative_change, run_algorithm1,
                        trace_is_monotone)
from .bounds import AffineBound, taylor_quadratic_lb, taylor_quadratic_over_affine_lb
from .model import (TRACE_COLUMNS, TWO_PI, Evaluation, InitializationError, IterationRecord,
                    IterationTrace, QoSIncompatible, SCAConfig, SolutionState, StepRecord,
                    SystemModel, grid_index, phase_grid, project_phase)
from .steps import (StepInfo, active_step, evaluate_into, initial_power, initialize,
                    matched_filters, passive_step, power_step, quantize, random_phases)
from .subproblems import (active_point, build_active_subproblem, build_passive_subproblem,
                          build_power_subproblem, cluster_signal_interference, extract_power,
                          minimal_qos_power, passive_point, power_margins, tail_sums)

__all__ = [name for name in dir() if not name.startswith("_")]
