"""Distributed primal decomposition for constraint-coupled mixed-integer linear programs."""

__version__ = "0.1.0"

from .agent import AlgoConfig, StepSchedule, allocation_update, solve_relaxed_subproblem  # noqa: E402
from .analysis import (  # noqa: E402
    check_feasibility,
    compare_methods,
    find_slater_point,
    integrality_census,
    solve_master_central,
    solve_milp_central,
    solve_restricted_lp_central,
)
from .lp import LinearProgram, solve_lp  # noqa: E402
from .milp import MixedIntegerProgram, lex_min_violation, solve_milp, solve_milp_bruteforce  # noqa: E402
from .model import (  # noqa: E402
    AgentBlock,
    GeneratorParams,
    Instance,
    SolutionVector,
    evaluate_solution,
    generate_random,
    load_instance,
    save_instance,
)
from .network import make_graph, run_rounds  # noqa: E402
from .restriction import restriction_report, sigma_asy, sigma_baseline  # noqa: E402

__all__ = [
    "AgentBlock", "Instance", "SolutionVector", "GeneratorParams", "generate_random", "evaluate_solution",
    "load_instance", "save_instance", "LinearProgram", "solve_lp", "MixedIntegerProgram", "solve_milp",
    "solve_milp_bruteforce", "lex_min_violation", "sigma_asy", "sigma_baseline", "restriction_report",
    "AlgoConfig", "StepSchedule", "solve_relaxed_subproblem", "allocation_update", "make_graph", "run_rounds",
    "solve_restricted_lp_central", "solve_master_central", "solve_milp_central", "integrality_census",
    "find_slater_point", "check_feasibility", "compare_methods",
]
