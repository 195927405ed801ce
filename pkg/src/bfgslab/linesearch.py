"""Armijo-Wolfe predicates and the log-bisection step-size search.

The bracketing search starts from the unit step, expands or shrinks on a
doubly-exponential schedule while the bracket is one-sided, and bisects
in log space (geometric mean of the bracket ends) once both ends are
pinned.  Each loop queries the objective value at most once and the
gradient at most once.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, LineSearchError, NonDescentError
from .validation import check_in_open_interval, check_vector

# The doubly-exponential trial schedule over/underflows float64 in a
# handful of loops on degenerate inputs; leaving this range is raised as
# a bracketing failure rather than silently continuing.
ETA_MIN_CLAMP = 1e-16
ETA_MAX_CLAMP = 1e16


@dataclass
class WolfeParams:
    """Line search parameters with the standard ordering 0 < alpha < 1/2,
    alpha < beta < 1."""

    alpha: float
    beta: float
    max_loops: int = 100

    def __post_init__(self):
        check_in_open_interval(self.alpha, 0.0, 0.5, "alpha")
        if not (self.alpha < self.beta < 1.0):
            raise ConfigError(
                f"need alpha < beta < 1, got alpha={self.alpha}, beta={self.beta}")
        if self.max_loops < 1:
            raise ConfigError("max_loops must be >= 1")


@dataclass
class Trial:
    """One predicate-evaluation loop body of the bracketing search."""

    eta: float
    armijo_ok: bool
    curvature_ok: bool | None  # None when Armijo already failed
    bracket: tuple  # (eta_min, eta_max) before this trial was judged


@dataclass
class LineSearchResult:
    """Accepted step plus the accounting the loop-count theory refers to.

    loops counts executed predicate-evaluation loop bodies; evals counts
    objective value and gradient queries (at most 2 per loop).  f_new
    and g_new are the already-computed value and gradient at the
    accepted point so the caller never re-queries them.
    """

    eta: float
    loops: int
    evals: int
    unit_step_accepted: bool
    bracket_final: tuple
    f_new: float
    g_new: np.ndarray
    trials: list = field(default_factory=list)


def armijo_holds(f0, gd0, f_eta, eta, alpha):
    """Sufficient decrease: f(x + eta d) <= f(x) + alpha * eta * g'd.

    Ties count as holding (non-strict inequality).
    """
    if gd0 >= 0:
        raise NonDescentError(f"g'd = {gd0:.6g} is not a descent slope")
    return f_eta <= f0 + alpha * eta * gd0


def curvature_holds(gd_eta, gd0, beta):
    """Curvature lower bound: g(x + eta d)'d >= beta * g'd."""
    if gd0 >= 0:
        raise NonDescentError(f"g'd = {gd0:.6g} is not a descent slope")
    return gd_eta >= beta * gd0


def strong_wolfe_holds(f0, gd0, f_eta, gd_eta, eta, alpha, beta):
    """Armijo plus the two-sided slope bound |g(x+eta d)'d| <= beta |g'd|."""
    return (armijo_holds(f0, gd0, f_eta, eta, alpha)
            and abs(gd_eta) <= beta * abs(gd0))


def armijo_goldstein_holds(f0, gd0, f_eta, eta, c1, c2):
    """Goldstein bracket: -c1*eta*g'd <= f0 - f_eta <= -c2*eta*g'd."""
    if not (0 < c1 <= c2 < 1):
        raise ConfigError(f"need 0 < c1 <= c2 < 1, got c1={c1}, c2={c2}")
    if gd0 >= 0:
        raise NonDescentError(f"g'd = {gd0:.6g} is not a descent slope")
    decrease = f0 - f_eta
    return -c1 * eta * gd0 <= decrease <= -c2 * eta * gd0


def log_bisection(problem, x, d, params, f0=None, gd0=None):
    """Bracketing search for a step satisfying both Wolfe predicates.

    Schedule: trial eta starts at 1.  While the Armijo side keeps
    failing with no lower bracket yet, the next trial is (1/2)^(2^(i+1)-1);
    while the curvature side keeps failing with no upper bracket, it is
    2^(2^(i+1)-1); once both bracket ends are pinned, the trial is their
    geometric mean sqrt(eta_min * eta_max).

    Args:
        problem: objective with value()/gradient() oracles.
        x: current point.
        d: descent direction (g'd < 0 required).
        params: WolfeParams.
        f0, gd0: cached f(x) and gradient(x)'d; evaluated here if absent
            (those caller-side values do not count toward evals).

    Returns:
        LineSearchResult; the returned eta re-satisfies both predicates.

    Raises:
        LineSearchError: loop budget exhausted or the trial left
            [1e-16, 1e16]; carries the trial history.
        NonDescentError: g'd >= 0.
    """
    x = check_vector(x, problem.d, "x")
    d = check_vector(d, problem.d, "d")
    if f0 is None:
        f0 = problem.value(x)
    if gd0 is None:
        gd0 = float(np.dot(problem.gradient(x), d))
    if gd0 >= 0:
        raise NonDescentError(f"g'd = {gd0:.6g} is not a descent slope")

    eta_min, eta_max = 0.0, np.inf
    eta = 1.0
    evals = 0
    trials = []
    for i in range(params.max_loops):
        bracket_seen = (eta_min, eta_max)
        f_eta = problem.value(x + eta * d)
        evals += 1
        if not armijo_holds(f0, gd0, f_eta, eta, params.alpha):
            trials.append(Trial(eta, False, None, bracket_seen))
            eta_max = eta
            if eta_min == 0.0:
                eta = 0.5 ** (2 ** (i + 1) - 1)
            else:
                eta = np.sqrt(eta_min * eta_max)
        else:
            g_eta = problem.gradient(x + eta * d)
            evals += 1
            gd_eta = float(np.dot(g_eta, d))
            if not curvature_holds(gd_eta, gd0, params.beta):
                trials.append(Trial(eta, True, False, bracket_seen))
                eta_min = eta
                if eta_max == np.inf:
                    eta = 2.0 ** (2 ** (i + 1) - 1)
                else:
                    eta = np.sqrt(eta_min * eta_max)
            else:
                trials.append(Trial(eta, True, True, bracket_seen))
                return LineSearchResult(
                    eta=eta, loops=i + 1, evals=evals,
                    unit_step_accepted=(i == 0),
                    bracket_final=(eta_min, eta_max),
                    f_new=f_eta, g_new=g_eta, trials=trials)
        if not (ETA_MIN_CLAMP <= eta <= ETA_MAX_CLAMP):
            raise LineSearchError(
                f"trial step {eta:.3g} left the representable window "
                "(violated preconditions, e.g. nonconvexity?)", trials)

    raise LineSearchError(
        f"no admissible step within {params.max_loops} loops", trials)


def backtracking(problem, x, d, alpha, shrink=0.5, max_halvings=100,
                 f0=None, gd0=None):
    """Largest step in {shrink^k} satisfying the Armijo condition.

    Baseline search for the gradient-descent comparison runs.  Returns
    (eta, k_trials, f_new) where k_trials counts Armijo evaluations.
    """
    x = check_vector(x, problem.d, "x")
    d = check_vector(d, problem.d, "d")
    if not 0.0 < shrink < 1.0:
        raise ConfigError(f"shrink must lie in (0, 1), got {shrink}")
    if f0 is None:
        f0 = problem.value(x)
    if gd0 is None:
        gd0 = float(np.dot(problem.gradient(x), d))
    if gd0 >= 0:
        raise NonDescentError(f"g'd = {gd0:.6g} is not a descent slope")

    eta = 1.0
    for k in range(max_halvings + 1):
        f_eta = problem.value(x + eta * d)
        if armijo_holds(f0, gd0, f_eta, eta, alpha):
            return eta, k + 1, f_eta
        eta *= shrink
    raise LineSearchError(
        f"backtracking failed to satisfy Armijo within {max_halvings} halvings")
