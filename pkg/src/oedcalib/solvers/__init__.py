from ._report import DesignReport
from .copt import solve_c_optimal
from .dopt import solve_d_optimal
from .evaluate import EvaluationReport, default_criteria, evaluate_fixed_design, optimum
from .sequences import Family, SequenceSpec, generate, optimize_sequence
from .wynn import WynnConfig, solve_gi_optimal, solve_vi_optimal

__all__ = [
    "DesignReport", "EvaluationReport", "Family", "SequenceSpec", "WynnConfig",
    "default_criteria", "evaluate_fixed_design", "generate", "optimize_sequence", "optimum",
    "solve_c_optimal", "solve_d_optimal", "solve_gi_optimal", "solve_vi_optimal",
]
