"""BFGS with Armijo-Wolfe log-bisection line search, instrumented for
convergence-rate certification on strongly convex benchmarks."""

from .analysis import (BoundReport, DeltaConstants, WeightScheme,
                       complexity_report, compute_Ct, compute_rho,
                       delta_constants, full_verification, omega, psi,
                       trace_diagnostics)
from .bfgs import BfgsState, InitScheme, direction, init_state, update
from .linesearch import (LineSearchResult, WolfeParams, armijo_goldstein_holds,
                         armijo_holds, backtracking, curvature_holds,
                         log_bisection, strong_wolfe_holds)
from .problems import (CubicChainProblem, QuadraticProblem, cubic_g, evaluate,
                       finite_diff_grad_check, make_cubic_problem,
                       make_quadratic_problem, reference_solution)
from .solvers import (BfgsSolver, GradientDescentSolver, IterRecord, RunTrace,
                      SolverConfig, run, run_bfgs, run_gd)

__version__ = "0.1.0"

__all__ = [
    "BfgsSolver", "BfgsState", "BoundReport", "CubicChainProblem",
    "DeltaConstants", "GradientDescentSolver", "InitScheme", "IterRecord",
    "LineSearchResult", "QuadraticProblem", "RunTrace", "SolverConfig",
    "WeightScheme", "WolfeParams", "armijo_goldstein_holds", "armijo_holds",
    "backtracking", "complexity_report", "compute_Ct", "compute_rho",
    "cubic_g", "curvature_holds", "delta_constants", "direction", "evaluate",
    "finite_diff_grad_check", "full_verification", "init_state",
    "log_bisection", "make_cubic_problem", "make_quadratic_problem", "omega",
    "psi", "reference_solution", "run", "run_bfgs", "run_gd",
    "strong_wolfe_holds", "trace_diagnostics", "update",
]
